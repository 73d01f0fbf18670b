# Copyright 2026 The ShiftBench Authors. All Rights Reserved.
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
# ==============================================================================
"""Monte-Carlo reference AUROCs for the synthetic separation benchmark.

Independent of the C++ code: numpy sampling, population parameters for the
Mahalanobis and MSP scores, brute-force KNN against freshly drawn banks, and
a Mann-Whitney AUROC from scipy. The printed values are pinned in
acceptance.cpp.

Setup: 10 classes in 32 dims, mean_c = (10 / sqrt(2)) e_c (every pair of
centres 10 apart), unit covariance. The OOD Gaussian is centred at the
class centroid plus sqrt(19) e_10, exactly 8 from every class mean. Head: W_c = mean_c,
b_c = -|mean_c|^2 / 2. KNN uses a bank of 200 training points per class and
k = 200.
"""

import numpy as np
from scipy.stats import mannwhitneyu

D, C = 32, 10
N = 100_000
BANK_PER_CLASS = 200
K = 200
BANKS = 3

rng = np.random.default_rng(20260101)
means = np.zeros((C, D))
means[np.arange(C), np.arange(C)] = 10.0 / np.sqrt(2.0)
ood_centre = means.mean(0)
ood_centre[C] = np.sqrt(19.0)
assert np.allclose(np.linalg.norm(means - ood_centre, axis=1), 8.0)


def sample_id(n):
    y = rng.integers(0, C, n)
    return means[y] + rng.standard_normal((n, D))


def sample_ood(n):
    return ood_centre + rng.standard_normal((n, D))


def auroc(pos, neg):
    u = mannwhitneyu(pos, neg, alternative="two-sided").statistic
    return u / (len(pos) * len(neg))


def mahalanobis(x):
    d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(-1)
    return -d2.min(1)


def msp(x):
    logits = x @ means.T - 0.5 * (means ** 2).sum(1)
    logits -= logits.max(1, keepdims=True)
    p = np.exp(logits)
    return (p / p.sum(1, keepdims=True)).max(1)


def knn(x, bank):
    xn = x / np.linalg.norm(x, axis=1, keepdims=True)
    out = np.empty(len(x))
    for s in range(0, len(x), 5000):
        q = xn[s:s + 5000]
        d2 = np.maximum(2.0 - 2.0 * q @ bank.T, 0.0)
        out[s:s + 5000] = -np.sqrt(np.partition(d2, K - 1, axis=1)[:, K - 1])
    return out


x_id = sample_id(N)
x_ood = sample_ood(N)
print(f"mahalanobis {auroc(mahalanobis(x_id), mahalanobis(x_ood)):.6f}")
print(f"msp         {auroc(msp(x_id), msp(x_ood)):.6f}")
vals = []
for _ in range(BANKS):
    bank = np.concatenate([means[c] + rng.standard_normal((BANK_PER_CLASS, D)) for c in range(C)])
    bank /= np.linalg.norm(bank, axis=1, keepdims=True)
    vals.append(auroc(knn(x_id, bank), knn(x_ood, bank)))
print(f"knn         {np.mean(vals):.6f} (banks: {', '.join(f'{v:.6f}' for v in vals)})")
