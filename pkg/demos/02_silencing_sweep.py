"""Partial silencing of echo1 and what it does to the rest of the train.

Sweeping the detuning of a 20 us window over echo1 traces out the
resonator's filter function.  Echo2 and echo3 follow linearly, since each
echo is stimulated by the one before.  Takes about a minute.
"""
from ssecho.config import load_config
from ssecho.experiments import run_sweep

values, results, summary = run_sweep(load_config("fig2c"))
f = summary["filter"]
print(f"dressed loss rate seen by echo1: kappa_eff/2pi = {f['kappa_eff_mhz']:.2f} MHz\n")
print(" delta/MHz  delta/kappa   echo1/echo1(0)   filter   echo2/echo1")
for v, x, m, p, res in zip(values, f["x"], f["measured"], f["model"], results):
    a = [r.amplitude("area") for r in res.records]
    print(f"  {v:7.1f}   {x:8.2f}     {m:10.4f}     {p:7.4f}   {a[1] / a[0]:8.4f}")
print(f"\nrelative rms deviation from the filter function: {f['rms_rel']:.3f}")
s = summary["slopes"]
print(f"echo2 vs echo1 slope {s['echo2_vs_echo1']:.3f} (R2 {s['r2_21']:.4f}), "
      f"echo3 vs echo2 slope {s['echo3_vs_echo2']:.3f}")
