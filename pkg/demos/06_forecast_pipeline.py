"""
One-week forecast on synthetic data
===================================

Fit the full model (lagged KDE plus random Fourier features) on events up
to a cutoff, forecast the following week, score it and draw a map.
"""
from pathlib import Path

from kernelcast.config import competition_config
from kernelcast.experiments import hawkes_scenario
from kernelcast.forecast import PipelineOptions, fit_model, forecast_at, score_forecast, window_counts
from kernelcast.render import hotspot_map_svg
from kernelcast.synth import simulate_hawkes

spec = hawkes_scenario(seed=4, horizon_days=400)
events = simulate_hawkes(spec)

# the bundled burglary one-week configuration
hp = competition_config("burglary", "1w")
options = PipelineOptions(max_train_periods=20)
model = fit_model(hp, events, spec.region, cutoff=300.0, window_days=7.0, options=options)
print(f"trained on {model.n_train_periods} weekly periods, converged={model.report.converged}")

fc = forecast_at(model, events, options=options)
rep = score_forecast(fc, model, events, options)
print(f"{fc.selection.k} cells selected; PEI {rep.pei:.3f}, PAI {rep.pai:.2f}")

out = Path("demo_output")
out.mkdir(exist_ok=True)
counts = window_counts(events, model.ctx.grid, 300.0, 7.0)
svg = hotspot_map_svg(model.ctx.grid, spec.region, fc.selection, counts, model.ctx.active,
                      title="week after day 300")
(out / "forecast_map.svg").write_text(svg)
print("map written to", out / "forecast_map.svg")
