"""Linear SVM training, boundary distances, and one-vs-one decoding.

Builds a small synthetic digit corpus, fits the binary 3-vs-5 classifier
and a 3/5/8 one-vs-one ensemble, and walks through distance-based
uncertainty and Hamming decoding on a few samples.
"""

import numpy as np

from edgeacq import dataio, svm, synth

paths = synth.write_corpus("demo-output/corpus", n_train=900, n_test=300, seed=1, classes=(3, 5, 8))
X = dataio.load_idx_images(paths["train_images"])
y = dataio.load_idx_labels(paths["train_labels"])
tX = dataio.load_idx_images(paths["test_images"])
ty = dataio.load_idx_labels(paths["test_labels"])

bx, by = dataio.build_binary_subset(X, y, 3, 5)
tbx, tby = dataio.build_binary_subset(tX, ty, 3, 5)
model = svm.train_binary(bx, by.astype(float), C=0.05)
print(f"binary 3-vs-5: {bx.shape[0]} train samples, test accuracy "
      f"{svm.accuracy(model, tbx, tby):.3f}, objective {model.objective:.2f}")

d = svm.distances(model, bx)
u = svm.uncertainties(model, bx)
order = np.argsort(d)
print("\nclosest samples to the boundary (most uncertain):")
for i in order[:3]:
    print(f"  sample {i}: distance {d[i]:.4f}, uncertainty {u[i]:8.2f}, label {by[i]:+d}")
print("farthest sample:", f"distance {d[order[-1]]:.4f}, uncertainty {u[order[-1]]:.3f}")

mx, my = dataio.build_multiclass_subset(X, y, (3, 5, 8))
mtx, mty = dataio.build_multiclass_subset(tX, ty, (3, 5, 8))
ensemble = svm.train_multiclass(mx, my, (3, 5, 8), C=0.05)
print(f"\none-vs-one 3/5/8 ensemble: {ensemble.n_components} components, "
      f"test accuracy {svm.accuracy(ensemble, mtx, mty):.3f}")
print("coding matrix (rows = classes, columns = pairwise classifiers):")
print(ensemble.coding_matrix)

s = svm.component_scores(ensemble, mx[0])
row = svm.hamming_decode(ensemble.coding_matrix, s)
print(f"\nsample 0: true class {my[0]}, scores {np.round(s, 3)}, "
      f"decoded class {ensemble.classes[row]}")
print("generalized Hamming distances per class:",
      np.round(svm.hamming_distances(ensemble.coding_matrix, s), 2))
