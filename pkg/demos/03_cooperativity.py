"""How the echo-to-echo transfer eta depends on cooperativity.

The coupling strength is set so that C = 4 g_ens^2 / (Gamma kappa) takes a
few values at fixed cavity and linewidth.  Each run is fit with the
geometric transfer law for the echo train.  A second, narrow-line ensemble
at C = 0.2 shows how weak the self-stimulated echoes become.
"""
from ssecho.config import load_config, resolve
from ssecho.experiments import run_experiment, run_sweep

values, results, _ = run_sweep(load_config("fig3e"))
print("   C     eta    echo areas")
for c, res in zip(values, results):
    amps = "  ".join(f"{r.amplitude('area'):.2e}" for r in res.records)
    print(f"  {c:4.1f}  {res.summary['eta']['eta']:.3f}   {amps}")

print()
for label, ens in (("C ~ 3  (g_ens 10 MHz, 76 MHz line)", {}),
                   ("C ~ 0.2 (g_ens 1.2 MHz, 15 MHz line)", {"g_ens_mhz": 1.2, "linewidth_mhz": 15.0})):
    res = run_experiment(resolve(load_config({"preset": "fig1b", "ensemble": ens})))
    a = [r.amplitude("area") for r in res.records]
    print(f"{label}: echo2/echo1 = {a[1] / a[0]:.4f}")
