"""Choose strain-sensor locations as cluster medoids and check reconstruction error."""

# %%
from kinecluster import PatternSpec, build_domain, make_boundary_condition
from kinecluster.forward_sim import sample_markers, solve_forward
from kinecluster.kinematics import markers_to_features
from kinecluster.reconstruction import sensor_sweep

homogeneous = build_domain(PatternSpec.circle(), 48, materials=((1.0, 0.3), (1.0, 0.3)))
sets = []
for bc in ("uniaxial_y", "shear", "equibiaxial"):
    field = solve_forward(homogeneous, make_boundary_condition(bc, 0.3, grips="clamped"))
    fm, _ = markers_to_features(sample_markers(field, 1000, seed=7), "green_lagrange", R=45)
    sets.append(fm)

# %% one load alone, then all three voting together; the error is measured on E22 of the first
for label, chosen in (("single", sets[:1]), ("ensemble", sets)):
    for report in sensor_sweep(chosen, [2, 8, 32], eval_case=0, seed=3):
        print(f"{label:>8} k={report.k:>2}  sensors={report.n_sensors:>3}  MSE={report.mse:.2e}")
