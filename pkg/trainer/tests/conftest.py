import pytest

from gridtrainer.features import FeatureExtractor, PretrainedWeightsError

from synth import synth_photos


@pytest.fixture(scope="session")
def extractor():
    # pretrained when the machine has the weights, otherwise the
    # explicit seeded untrained mode; every property tested here holds
    # for any fixed extractor
    try:
        return FeatureExtractor()
    except PretrainedWeightsError:
        return FeatureExtractor(pretrained=False, seed=0)


@pytest.fixture(scope="session")
def photo_batch():
    return synth_photos(11, 6)
