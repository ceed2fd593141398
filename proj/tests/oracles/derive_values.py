#!/usr/bin/env python3
# Copyright 2026 The mlcas Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Independent reference values for the C++ tests.

Everything here is computed with numpy, scipy, scikit-learn and shap, so
none of it shares code with the library. The printed numbers are frozen
into the test sources; rerun this script to regenerate them.
"""

import numpy as np
import scipy.stats
import shap
import sklearn.metrics
import sklearn.tree

np.set_printoptions(precision=17)


def show(name, value):
    if isinstance(value, (list, tuple, np.ndarray)):
        print(f"{name} = {{" + ", ".join(repr(float(v)) for v in np.ravel(value)) + "}")
    else:
        print(f"{name} = {float(value)!r}")


# Meta-features of the mixed-kind fixture used in test_metafeatures.cpp.
num0 = np.array([1.5, -2.0, 3.25, 0.0, 4.0, 1.0])
num1 = np.array([10.0, 12.0, 9.0, 11.0, 10.0, 14.0])
bin0 = np.array([0, 1, 1, 0, 1, 0])
labels = np.array([
    [1, 0, 0, 1],
    [1, 1, 0, 0],
    [0, 1, 0, 0],
    [1, 1, 1, 0],
    [1, 0, 0, 1],
    [0, 0, 0, 1],
])
n, q = labels.shape
d = 4  # num0, num1, bin0, cat0
counts = labels.sum(axis=0)
ir = counts.max() / counts
card = labels.sum(axis=1).mean()
labelsets = {tuple(r) for r in labels}
chi = []
for a in range(q):
    for b in range(a + 1, q):
        table = np.array([[np.sum((labels[:, a] == i) & (labels[:, b] == j)) for j in (0, 1)] for i in (0, 1)])
        if (table.sum(axis=0) == 0).any() or (table.sum(axis=1) == 0).any():
            chi.append(0.0)
        else:
            chi.append(scipy.stats.chi2_contingency(table, correction=False)[0])
show("mixed.values", [
    n, d, q, n / d, card, card / q,
    (counts / n).min(), (counts / n).mean(), (counts / n).max(),
    ir.mean(), ir.max(), ir.std() / ir.mean(),
    len(labelsets), len(labelsets) / n, n / len(labelsets),
    np.mean(np.array(chi) > 6.635),
    1 / d, 2 / d, 1 / d,
    np.mean([num0.mean(), num1.mean()]), np.mean([num0.std(), num1.std()]),
])
show("mixed.chi2_pairs", chi)

# Chi-square of the identical-columns example.
col = np.array([1] * 10 + [0] * 10)
table = np.array([[np.sum((col == i) & (col == j)) for j in (0, 1)] for i in (0, 1)])
show("chi2.identical", scipy.stats.chi2_contingency(table, correction=False)[0])

# Pearson of two fixed vectors.
x = np.array([0.3, 1.7, 2.2, 5.1, 4.4, 3.3, 0.9])
y = np.array([1.0, 2.5, 2.0, 6.0, 3.9, 4.1, 0.2])
show("pearson.xy", np.corrcoef(x, y)[0, 1])

# CART reference: scikit-learn on a tie-free two-feature problem.
X = np.array([[0.1, 5.0], [0.4, 3.0], [0.35, 1.0], [0.8, 2.5], [0.9, 4.5], [0.6, 0.5], [0.2, 2.0], [0.7, 3.8]])
Y = np.array([1.0, 2.0, 2.2, 4.0, 5.5, 3.1, 1.4, 4.9])
reg = sklearn.tree.DecisionTreeRegressor(max_depth=2, random_state=0).fit(X, Y)
probe = np.array([[0.15, 4.0], [0.5, 1.5], [0.85, 4.0], [0.65, 0.2], [0.3, 2.9]])
show("cart.depth2.predict", reg.predict(probe))
tr = reg.tree_
show("cart.depth2.root", [tr.feature[0], tr.threshold[0]])
step = sklearn.tree.DecisionTreeRegressor().fit(np.array([[-2.0], [-1.0], [1.0], [2.0]]), np.array([1.0, 1.0, 3.0, 3.0]))
show("cart.step.threshold", step.tree_.threshold[0])

# Macro-F1 with the union-of-labels class set.
truth = ["A", "A", "A", "B"]
chosen = ["A", "A", "A", "A"]
show("f1.constant", sklearn.metrics.f1_score(truth, chosen, labels=sorted(set(truth) | set(chosen)), average="macro"))
truth = ["A", "B", "C", "A", "B", "C", "A"]
chosen = ["A", "C", "C", "B", "B", "D", "A"]
show("f1.mixed", sklearn.metrics.f1_score(truth, chosen, labels=sorted(set(truth) | set(chosen)), average="macro"))

# Linear-interpolation quantiles.
v = np.array([0.31, 0.02, 0.5, 0.11, 0.27, 0.08])
show("quantile.v", [np.percentile(v, p, method="linear") for p in (0, 25, 50, 75, 100)])

# Path-dependent TreeSHAP on the hand-built two-tree forest of test_explain.cpp.
def tree_dict(left, right, feature, threshold, value, cover):
    return {
        "children_left": np.array(left), "children_right": np.array(right),
        "children_default": np.array(left), "features": np.array(feature),
        "thresholds": np.array(threshold, dtype=float), "values": np.array(value, dtype=float).reshape(-1, 1),
        "node_sample_weight": np.array(cover, dtype=float),
    }

# Tree A: root x0 <= 0.5 ; left: x1 <= 2 -> leaves 1.0 (3) / 2.0 (2); right leaf 4.0 (5).
# Tree B: root x2 <= -1 ; left leaf 0.5 (4); right: x0 <= 0.2 -> 3.0 (1) / 1.5 (5).
# Node order is preorder, matching the C++ layout.
trees = [
    tree_dict([1, 2, -1, -1, -1], [4, 3, -1, -1, -1], [0, 1, -2, -2, -2], [0.5, 2.0, -2, -2, -2],
              [2.9, 1.4, 1.0, 2.0, 4.0], [10, 5, 3, 2, 5]),
    tree_dict([1, -1, 3, -1, -1], [2, -1, 4, -1, -1], [2, -2, 0, -2, -2], [-1.0, -2, 0.2, -2, -2],
              [1.35, 0.5, 1.75, 3.0, 1.5], [10, 4, 6, 1, 5]),
]
explainer = shap.TreeExplainer({"trees": trees}, feature_perturbation="tree_path_dependent")
for name, point in [("p1", [0.3, 1.0, 0.0]), ("p2", [0.9, 3.0, -2.0]), ("p3", [0.1, 2.5, 4.0])]:
    phi = explainer.shap_values(np.array([point]))[0]
    # shap sums trees; the library averages them.
    show(f"shap.{name}.phi", np.array(phi) / 2.0)
    show(f"shap.{name}.base", np.ravel(explainer.expected_value)[0] / 2.0)
