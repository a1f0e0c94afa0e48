"""Power estimates for the three receiver architectures.

The task-specific receiver uses lower-power VMs, low-resolution ADCs and
switches off a quarter of its VMs.
"""

# %%
from taskbeam.evaluation import (
    TABLE1_CONVENTIONAL_HYBRID,
    TABLE1_FULLY_DIGITAL,
    TABLE1_TASK_SPECIFIC,
    PowerProfile,
    power_breakdown,
    power_fully_digital,
    power_hybrid,
)

print(f"fully digital        {power_fully_digital(8, TABLE1_FULLY_DIGITAL):6.1f} mW", power_breakdown(8, None, TABLE1_FULLY_DIGITAL))
print(f"conventional hybrid  {power_hybrid(8, 2, TABLE1_CONVENTIONAL_HYBRID):6.1f} mW", power_breakdown(8, 2, TABLE1_CONVENTIONAL_HYBRID))
print(f"task-specific hybrid {power_hybrid(8, 2, TABLE1_TASK_SPECIFIC):6.1f} mW", power_breakdown(8, 2, TABLE1_TASK_SPECIFIC))

# %% How the task-specific estimate scales with the active-VM fraction
for frac in (1.0, 0.75, 0.5, 0.25):
    profile = PowerProfile(p_vm=10.0, p_adc=0.5, sparsity_coeff=frac)
    print(f"{frac:4.2f} of VMs active: {power_hybrid(8, 2, profile):6.1f} mW")
