# %% [markdown]
# # The Jacobi operator and its kernel
#
# Along a harmonic map u the second variation of energy is governed by the
# Jacobi operator J = (d-bar)^* d-bar + R acting on sections of the pulled
# back complexified tangent bundle.  J is real, symmetric and positive
# semi-definite.  At the covering map it has no kernel; at a constant map the
# constant sections span a kernel, and solutions of J V = b are only defined
# up to kernel vectors.  The quantity <J V, V> that enters the second
# variation does not notice that ambiguity.

# %%
import numpy as np

from wplab import BundleSection, JacobiSystem, covering_scenario
from wplab.variation import constant_scenario

rng = np.random.default_rng(1)

sc = covering_scenario(2, 2, 2)
J = JacobiSystem(sc.critical()[0])
smallest, lam_max = J.jacobi_spectrum_bottom()
print(f"covering map: lambda_max {lam_max:.3e}, smallest eigenvalues {np.round(smallest[:4], 4)}")
print(f"numerical kernel dimension {len(J.jacobi_kernel())}")

# %%
W = BundleSection.real(rng.normal(size=J.n) + 1j * rng.normal(size=J.n))
JW = J.jacobi_apply(W)
print(f"<JW, W> = {J.section_inner(JW, W).real:.4e}, reality defect of JW {JW.reality_defect():.1e}")

# %%
cst = constant_scenario(2, 2)
Jc = JacobiSystem(cst.critical()[0])
K = Jc.jacobi_kernel()
print(f"constant map: kernel dimension {len(K)}")

b = Jc.project_off_kernel(BundleSection.real(rng.normal(size=Jc.n) + 1j * rng.normal(size=Jc.n)))
V = Jc.solve_jacobi(b)
base = Jc.section_inner(Jc.jacobi_apply(V), V).real
for Z in K:
    V2 = V + 5.0 * Z
    print(f"    <J V, V> changes by {abs(Jc.section_inner(Jc.jacobi_apply(V2), V2).real - base) / base:.1e} relative")
