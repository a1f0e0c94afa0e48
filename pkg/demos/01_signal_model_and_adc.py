"""Signal model, LMMSE floor and the dithered ADC model.

Builds the reference receiver (8 antennas, 2 RF chains, two desired sources,
two strong interferers), shows the estimation floor reached without any
quantization, and checks the closed-form quantized MSE against simulation.

Run with ``python demos/01_signal_model_and_adc.py``.
"""

# %%
import numpy as np

from taskbeam import AdcModel, build_covariances, kappa, mmse_floor, reference_scenario
from taskbeam.design import digital_filter, ex_mse
from taskbeam.evaluation import monte_carlo_mse
from taskbeam.quantization import midtread_quantize

scenario = reference_scenario()
bundle = build_covariances(scenario)
print("desired AoAs (deg):", np.rad2deg(scenario.desired_angles))
print("interferer AoAs (deg):", np.rad2deg(scenario.interferer_angles))
print(f"LMMSE floor without quantization: {mmse_floor(bundle):.4f}")

# %% The quantizer: mid-tread, saturating, and 16 levels per real component
grid = np.linspace(-1.2, 1.2, 9)
print("input :", np.round(grid, 3))
print("output:", np.round(midtread_quantize(grid, 16, 1.0), 3))
print(f"loading constant kappa for b=16: {kappa(AdcModel(16)):.4f} (tends to 9 as b grows)")

# %% Closed form vs simulation for the LMMSE combiner Gamma and a random one
rng = np.random.default_rng(0)
combiners = {"gamma": bundle.gamma, "random": rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))}
for b in (16, 64):
    adc = AdcModel(b)
    for name, A in combiners.items():
        B = digital_filter(A, bundle, adc)
        analytic = mmse_floor(bundle) + ex_mse(A, bundle, adc)
        simulated = monte_carlo_mse(A, B, scenario, adc, 200_000, seed=1)
        print(f"b={b:<3} {name:<7} analytic {analytic:.4f}  monte carlo {simulated:.4f}")
