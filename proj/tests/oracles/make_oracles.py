"""Regenerates tests/oracle_data.hpp from reference implementations.

Run from the repository root: python3 tests/oracles/make_oracles.py
"""
import numpy as np
from scipy import optimize, stats
from sklearn.mixture import GaussianMixture
from sklearn.svm import OneClassSVM
from statsmodels.stats.multitest import multipletests


def arr(name, values, kind="double"):
    vals = ", ".join(repr(float(v)) if kind == "double" else str(int(v)) for v in np.ravel(values))
    return f"inline constexpr {kind} {name}[] = {{{vals}}};\n"


out = ["#pragma once\n// Generated by tests/oracles/make_oracles.py. Do not edit.\n\nnamespace oracle {\n\n"]
rng = np.random.default_rng(20240611)

# One-class SVM: sklearn/libsvm decision values, unscaled dual (alpha <= 1).
X = rng.normal(size=(60, 2)) * [1.0, 0.5] + [0.3, -0.2]
T = np.array([[x, y] for x in (-2.0, -0.5, 0.0, 0.7, 2.5) for y in (-1.0, 0.0, 1.0)])
out.append(arr("kOcsvmTrain", X))
out.append(arr("kOcsvmQuery", T))
out.append("inline constexpr double kOcsvmGamma = 0.5;\n")
for nu in (0.1, 0.5):
    m = OneClassSVM(kernel="rbf", gamma=0.5, nu=nu, tol=1e-12, shrinking=False).fit(X)
    tag = str(nu).replace(".", "")
    out.append(arr(f"kOcsvmDecisionNu{tag}", m.decision_function(T)))
    out.append(f"inline constexpr double kOcsvmRhoNu{tag} = {float(-m.intercept_[0])!r};\n")
    out.append(f"inline constexpr int kOcsvmSvCountNu{tag} = {len(m.support_)};\n")
out.append("\n")

# Logistic calibration with Platt's smoothed targets, optimized by BFGS.
s = np.concatenate([rng.normal(1.0, 1.0, 30), rng.normal(-1.0, 1.2, 25)])
y = np.concatenate([np.ones(30), -np.ones(25)])
npos, nneg = 30, 25
t = np.where(y > 0, (npos + 1) / (npos + 2), 1 / (nneg + 2))


def nll(p):
    z = p[0] * s + p[1]
    q = 1 / (1 + np.exp(-z))
    return -np.sum(t * np.log(q) + (1 - t) * np.log(1 - q))


res = optimize.minimize(nll, [0.0, 0.0], method="BFGS", options={"gtol": 1e-12})
out.append(arr("kCalScores", s))
out.append(arr("kCalLabels", y, "int"))
out.append(f"inline constexpr double kCalA = {float(res.x[0])!r};\ninline constexpr double kCalB = {float(res.x[1])!r};\n\n")

# Wilcoxon signed-rank, two-sided.
a10 = rng.normal(0.3, 1.0, 10)
b10 = rng.normal(0.0, 1.0, 10)
out.append(arr("kWilA10", a10) + arr("kWilB10", b10))
out.append(f"inline constexpr double kWilP10 = {float(stats.wilcoxon(a10, b10, method='exact').pvalue)!r};\n")
a40 = np.round(rng.normal(0.2, 1.0, 40), 1)
b40 = np.round(rng.normal(0.0, 1.0, 40), 1)
out.append(arr("kWilA40", a40) + arr("kWilB40", b40))
p40 = stats.wilcoxon(a40, b40, zero_method="wilcox", correction=True, method="approx").pvalue
out.append(f"inline constexpr double kWilP40 = {float(p40)!r};\n\n")

# Holm.
p = rng.uniform(0, 0.2, 7)
out.append(arr("kHolmRaw", p) + arr("kHolmAdjusted", multipletests(p, method="holm")[1]) + "\n")

# Two-component 1-D mixture, EM to convergence.
v = np.concatenate([rng.normal(-2.0, 0.5, 200), rng.normal(3.0, 1.0, 100)])
g = GaussianMixture(2, tol=1e-12, reg_covar=0.0, max_iter=5000, n_init=5, random_state=0).fit(v.reshape(-1, 1))
order = np.argsort(g.means_.ravel())
out.append(arr("kGmmData", v))
out.append(arr("kGmmWeights", g.weights_[order]))
out.append(arr("kGmmMeans", g.means_.ravel()[order]))
out.append(arr("kGmmVars", g.covariances_.ravel()[order]))

out.append("\n}  // namespace oracle\n")
open("tests/oracle_data.hpp", "w").write("".join(out))
