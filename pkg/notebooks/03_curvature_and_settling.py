# %% [markdown]
# # Curvature from compliance, and the quasi-static check
#
# At small loads a curved surface meets the punch over a growing Hertz
# contact, so it is softer than at large loads where the full punch face is
# engaged. The ratio of the two compliances gives the curvature.

# %%
from palpsdf import MaterialParams, ShapeSpec
from palpsdf.contact import estimate_E_kappa_compliance, settling_time_check, transition_force
from palpsdf.sim import sample_surface_point, simulate_probe, site_rng

sphere = ShapeSpec.sphere((0.0, 0.0, 0.0), 0.1)
material = MaterialParams(E=8000.0, nu=0.45)
print(f"transition force {transition_force(material.Estar, 0.01, 10.0):.3f} N")

rng = site_rng(1, 0)
x0, n_out, kappa = sample_surface_point(sphere, rng)
probes = [simulate_probe(sphere, material, x0, n_out, kappa, F, 0.01, 0.0, rng)
          for F in (0.04, 0.06, 3.0, 4.5)]
rep = estimate_E_kappa_compliance(probes, 0.45)
print("compliances (m/N):", [f"{m:.4e}" for m in rep.compliances])
print(f"E = {rep.E_hat:.1f} Pa, kappa = {rep.kappa_hat:.2f} 1/m (true 10)")

# %% [markdown]
# The low-force compliance is a secant over 0.04-0.06 N, which slightly
# overstates the tangent at the midpoint, so kappa comes out about 1% high.
#
# Probing is treated as quasi-static. That holds when the contact lasts much
# longer than the time an elastic wave needs to cross the body.

# %%
T_e, ok = settling_time_check(MaterialParams(4480.0, 0.45, rho=960.0), ell=0.005, T_c=0.1)
print(f"T_e = {T_e * 1e3:.3f} ms, quasi-static: {ok}")
