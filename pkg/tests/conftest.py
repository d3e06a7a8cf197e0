import pytest

from balloonscope.config import CalibrationSettings, default_config
from balloonscope.harness import calibrate_from_scene
from balloonscope.imaging import RegionOfInterest, SceneModel
from balloonscope.plant import PlantModel


@pytest.fixture(scope="session")
def roi():
    return RegionOfInterest()


@pytest.fixture(scope="session")
def clean_scene():
    return SceneModel()


@pytest.fixture(scope="session")
def model():
    return PlantModel()


@pytest.fixture(scope="session")
def noisy_config():
    return default_config()


@pytest.fixture(scope="session")
def clean_calibration(clean_scene, roi):
    calibration, _ = calibrate_from_scene(clean_scene, roi, CalibrationSettings(), seed=0)
    return calibration


@pytest.fixture(scope="session")
def noisy_calibration(noisy_config):
    calibration, _ = calibrate_from_scene(
        noisy_config.scene, noisy_config.roi, noisy_config.calibration, seed=0
    )
    return calibration
