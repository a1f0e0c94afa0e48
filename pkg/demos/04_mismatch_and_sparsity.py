"""Hardware mismatch and switched-off vector modulators.

Designs a combiner with 25% of the VMs deactivated, then compares a design
that ignores VM gain/phase errors with one optimised over the corrupted gain
sets, averaging over 50 random hardware realisations (+-10% around the mean
errors).
"""

# %%
import numpy as np

from taskbeam import AdcModel, DesignParams, algorithm1, build_covariances, build_ideal, build_mismatched, mmse_floor, reference_scenario
from taskbeam.constellation import mismatch_from_dict
from taskbeam.evaluation import mismatch_mse

scenario = reference_scenario()
bundle = build_covariances(scenario)
adc = AdcModel(16)
floor = mmse_floor(bundle)

errors = {"i_gain": 0.1, "i_phase_deg": 10.0, "q_gain": -0.1, "q_phase_deg": -10.0, "out_gain": -0.05, "out_phase_deg": 5.0}
corrupted = build_mismatched(build_ideal(4), mismatch_from_dict(errors, (2, 8)))

# %% 25% sparse designs
ideal = algorithm1(bundle, adc, DesignParams(target_sparsity=0.25))
aware = algorithm1(bundle, adc, DesignParams(target_sparsity=0.25, mismatch=corrupted))
print("inactive VMs:\n", (ideal.combiner == 0).astype(int))
print(f"ideal hardware      {floor + ideal.final_ex_mse:.4f}")

# %% Same codes on mismatched hardware
for name, res in (("mismatch-unaware", ideal), ("co-optimised", aware)):
    values, _ = mismatch_mse(res.codes, res.digital_filter, corrupted, scenario, adc, n_draws=50, seed=6)
    print(f"{name:<19} mean {values.mean():.4f}  spread {np.ptp(values):.4f}")
