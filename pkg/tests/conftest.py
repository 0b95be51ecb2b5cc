import pytest

from sardamage import forest, inference, synthgen, training


@pytest.fixture(scope="session")
def clean_scene():
    """One generated clean-steps scenario shared by the read-only tests."""
    scenario = synthgen.load_preset("clean-steps", seed=7)
    stack, labels, footprints, truth = synthgen.generate(scenario)
    return {
        "scenario": scenario,
        "stack": stack,
        "labels": labels,
        "footprints": footprints,
        "truth": truth,
    }


@pytest.fixture(scope="session")
def clean_model(clean_scene):
    train_pts, _ = training.split_labels_spatially(
        clean_scene["labels"], clean_scene["stack"]
    )
    model, _ = training.train_from_stack(
        clean_scene["stack"], train_pts, config=forest.TrainConfig(seed=1)
    )
    return model


@pytest.fixture(scope="session")
def clean_maps(clean_scene, clean_model):
    job = inference.InferenceJob(
        stack=clean_scene["stack"],
        model=clean_model,
        periods=tuple(range(1, 13)),
        tile_size=64,
    )
    return inference.infer_map(job)
