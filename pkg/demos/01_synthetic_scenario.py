"""Generate a synthetic damage scenario and look at the raw material.

Walks through the scenario generator: a seeded grid of backscatter time
series with planted step-change events, the point labels and building
footprints that come with it, and the known truth table. Everything here is
deterministic: rerunning with the same seed reproduces every byte.
"""

from pathlib import Path

import numpy as np

from sardamage import synthgen
from sardamage.temporal import interval

OUT = Path("demo_out/01_scenario")


def main():
    scenario = synthgen.load_preset("clean-steps", seed=7)
    stack, labels, footprints, truth = synthgen.generate(scenario)

    print(f"grid: {stack.width}x{stack.height} px, crs {stack.transform.crs}")
    print(f"layers: {len(stack.layers)} (orbits {stack.orbits()})")
    print(f"events: {len(scenario.events)}, label points: {len(labels)}, "
          f"footprints: {len(footprints)}")

    # the timeline the whole pipeline runs on
    for n in (0, 1, 5, 12):
        iv = interval(n)
        role = "reference" if n == 0 else "assessment"
        print(f"  T{n:<2} {iv.start} .. {iv.end}  ({role})")

    # one damaged pixel's series, per orbit and band
    ev = scenario.events[0]
    col, row = ev.pixels[0]
    print(f"\nevent {ev.id}: {ev.delta_db:+.1f} dB step at pixel {(col, row)} "
          f"on {ev.date}")
    for orbit in stack.orbits():
        for pol in ("VV", "VH"):
            series = [
                (l.timestamp, float(l.values[row, col]))
                for l in stack.select(orbit=orbit, polarization=pol)
            ]
            pre = [v for d, v in series if d < ev.date]
            post = [v for d, v in series if d >= ev.date]
            print(f"  orbit {orbit} {pol}: pre mean {np.mean(pre):7.2f} dB, "
                  f"post mean {np.mean(post):7.2f} dB "
                  f"({len(pre)}+{len(post)} acquisitions)")

    OUT.mkdir(parents=True, exist_ok=True)
    from sardamage import geodata
    import json

    geodata.write_stack(stack, OUT / "stack")
    (OUT / "labels.geojson").write_text(
        json.dumps(geodata.labels_to_geojson(labels), indent=1)
    )
    (OUT / "truth.json").write_text(truth.to_json())
    print(f"\nwrote bundle to {OUT}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(8, 4))
        for orbit in stack.orbits():
            series = sorted(
                (l.timestamp, float(l.values[row, col]))
                for l in stack.select(orbit=orbit, polarization="VV")
            )
            ax.plot([d for d, _ in series], [v for _, v in series],
                    marker=".", lw=0.8, label=f"orbit {orbit} VV")
        ax.axvline(ev.date, color="red", ls="--", lw=1, label="event")
        ax.set_ylabel("backscatter [dB]")
        ax.legend()
        fig.autofmt_xdate()
        fig.savefig(OUT / "series.png", dpi=120, bbox_inches="tight")
        print(f"plotted {OUT / 'series.png'}")
    except ImportError:
        print("matplotlib not available; skipping the plot")


if __name__ == "__main__":
    main()
