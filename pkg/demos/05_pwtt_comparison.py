"""Forest vs pixel-wise t-test on a seasonal-confounder scenario.

The baseline compares window means adjusted by their spread, so a seasonal
cycle between the year-long reference and a 3-month assessment window looks
like change to it. The learned model sees those seasonal shifts labelled
intact during training and separates them from genuine steps. Both methods
run under the identical windowed-max evaluation protocol.
"""

from sardamage import evaluation, forest, inference, synthgen, training


def main():
    scenario = synthgen.load_preset("seasonal-confounder", seed=11)
    print(f"seasonal amplitude {scenario.seasonal_amplitude_db} dB, "
          f"event steps ±{abs(scenario.events[0].delta_db)} dB, "
          f"speckle {scenario.speckle_sigma_db} dB")
    stack, labels, _, _ = synthgen.generate(scenario)
    train_pts, test_pts = training.split_labels_spatially(labels, stack)
    model, _ = training.train_from_stack(
        stack, train_pts, config=forest.TrainConfig(seed=1)
    )

    periods = tuple(range(1, 13))
    maps = inference.infer_map(
        inference.InferenceJob(stack=stack, model=model, periods=periods, tile_size=64)
    )
    rf = evaluation.score_labels(maps, test_pts)
    tt = training.pwtt_scores_for_labels(stack, test_pts, periods)

    cmp = evaluation.compare_methods(
        rf.samples, tt.samples, rf_threshold=0.5, pwtt_cutoff=1.63
    )
    print()
    print(evaluation.format_report(cmp.rf, title="Random forest (threshold 0.5)"))
    print()
    print(evaluation.format_report(cmp.pwtt, title="Pixel-wise t-test (cutoff 1.63)"))
    print()
    verdict = "forest ahead" if cmp.rf.damaged.f1 > cmp.pwtt.damaged.f1 else "t-test ahead"
    print(f"F1 {cmp.rf.damaged.f1:.3f} vs {cmp.pwtt.damaged.f1:.3f} -> {verdict}")


if __name__ == "__main__":
    main()
