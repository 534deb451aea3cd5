import os

import numpy as np
import pytest

from edgeacq import dataio, synth


def pytest_addoption(parser):
    parser.addoption(
        "--mnist-dir",
        default=os.environ.get("EDGEACQ_MNIST_DIR", ""),
        help="directory with the reference MNIST IDX files (enables the "
        "reference-dataset tests)",
    )


@pytest.fixture(scope="session")
def mnist_dir(request):
    path = request.config.getoption("--mnist-dir")
    if not path or not os.path.isdir(path):
        pytest.skip("reference MNIST directory not available")
    return path


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Small synthetic digit corpus shared across the test session."""
    root = tmp_path_factory.mktemp("corpus")
    return synth.write_corpus(str(root), n_train=900, n_test=300, seed=7, classes=(3, 5, 8))


@pytest.fixture(scope="session")
def binary_pool(small_corpus):
    X = dataio.load_idx_images(small_corpus["train_images"])
    y = dataio.load_idx_labels(small_corpus["train_labels"])
    return dataio.build_binary_subset(X, y, 3, 5)


@pytest.fixture(scope="session")
def binary_test_set(small_corpus):
    X = dataio.load_idx_images(small_corpus["test_images"])
    y = dataio.load_idx_labels(small_corpus["test_labels"])
    return dataio.build_binary_subset(X, y, 3, 5)


@pytest.fixture(scope="session")
def tiny_model(binary_pool):
    from edgeacq import svm

    X, y = binary_pool
    return svm.train_binary(
        X[:120], y[:120].astype(np.float64), 0.05, params=svm.TrainerParams(max_rounds=400)
    )
