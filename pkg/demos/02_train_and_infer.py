"""Train the forest on one half of a scenario and map the other half.

Shows the supervised setup end to end: training rows are (point, period,
orbit) triples labelled by the dynamic rule, the trained model is a plain
JSON file, and dense inference produces one probability map per assessment
period, fused over orbits.
"""

from pathlib import Path

import numpy as np

from sardamage import forest, geodata, inference, synthgen, training

OUT = Path("demo_out/02_maps")


def main():
    scenario = synthgen.load_preset("clean-steps", seed=7)
    stack, labels, footprints, truth = synthgen.generate(scenario)
    train_pts, test_pts = training.split_labels_spatially(labels, stack)
    print(f"{len(train_pts)} training points (west half), "
          f"{len(test_pts)} held out (east half)")

    model, rows = training.train_from_stack(
        stack, train_pts, config=forest.TrainConfig(n_trees=50, seed=1)
    )
    print(f"training rows: {rows.y.size} "
          f"({int(rows.y.sum())} damaged / {int((rows.y == 0).sum())} intact, "
          f"{rows.n_discarded} discarded pairs)")

    OUT.mkdir(parents=True, exist_ok=True)
    forest.save(model, OUT / "model.json")
    print(f"model: {OUT / 'model.json'} "
          f"({sum(t.node_count for t in model.trees)} nodes across "
          f"{len(model.trees)} trees)")

    job = inference.InferenceJob(
        stack=stack, model=model, periods=tuple(range(1, 13)), tile_size=64
    )
    maps = inference.infer_map(job)
    for period in (1, 4, 5, 8, 12):
        pmap = maps[period]
        finite = pmap.values[np.isfinite(pmap.values)]
        print(f"  T{period:<2} probability map: mean {finite.mean():.3f}, "
              f"p99 {np.percentile(finite, 99):.3f}")
    # pre-invasion maps should be cold, post-invasion maps show the events

    for period, pmap in maps.items():
        geodata.write_probability_map(pmap, OUT / f"period_{period:02d}")
    geodata.write_uint8_bundle(maps[8], OUT / "period_08_u8")
    print(f"wrote {len(maps)} map bundles + one UInt8 export to {OUT}")


if __name__ == "__main__":
    main()
