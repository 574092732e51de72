"""
Penalised Poisson regression
============================

Fit log-linear intensities with an elastic-net penalty by proximal
gradient ascent, and watch the L1 weight switch coefficients off.
"""
import numpy as np

from kernelcast.glm import DesignMatrix, fit, predict

rng = np.random.default_rng(0)
n = 400
kde = rng.gamma(2.0, 1.0, (n, 3))
rff = rng.uniform(-1, 1, (n, 8)) / np.sqrt(4)
true_eta = 0.4 * kde[:, 0] - 0.5 + 0.8 * rff[:, 1]
counts = rng.poisson(np.exp(true_eta))
design = DesignMatrix(kde, rff, counts)

for a in (0.0, 5.0, 50.0):
    params, rep = fit(design, a=a, b=0.1)
    nonzero = int(np.count_nonzero(params.theta))
    print(f"a={a:5.1f}  objective {rep.objective:10.3f}  nonzero {nonzero:2d}  "
          f"epochs {rep.iterations}  converged {rep.converged}")

params, _ = fit(design, a=0.0, b=0.1)
lam = predict(params, design)
print("correlation of fitted and true intensity:",
      round(float(np.corrcoef(lam, np.exp(true_eta))[0, 1]), 3))
