import numpy as np
import pytest

from core.config import settings
from data.models import LayerKind, LayerSpec
from services.dataset import stratified_split
from services.model_zoo import build_baseline
from services.synthetic import generate_synthetic


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "logs_dir", str(tmp_path / "logs"))
    monkeypatch.setattr(settings, "log_to_file", False)
    return settings


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_beats():
    return generate_synthetic([16, 16, 16, 16, 16], seed=3, sigma=0.05)


@pytest.fixture
def partitions(tiny_beats):
    return stratified_split(tiny_beats, seed=11)


@pytest.fixture
def baseline():
    return build_baseline(0)


@pytest.fixture
def small_specs():
    # conv 1->2 k3 s2 -> relu -> pool k2 s2 -> flatten -> dense 6->4 relu -> dense 4->3
    return [
        LayerSpec(name="c1", kind=LayerKind.CONV, in_channels=1, out_channels=2, kernel=3, stride=2),
        LayerSpec(name="r1", kind=LayerKind.ACTIVATION),
        LayerSpec(name="p1", kind=LayerKind.POOL, kernel=2, stride=2),
        LayerSpec(name="f", kind=LayerKind.FLATTEN),
        LayerSpec(name="d1", kind=LayerKind.DENSE, in_channels=6, units=4, fused_relu=True),
        LayerSpec(name="d2", kind=LayerKind.DENSE, in_channels=4, units=3),
    ]


@pytest.fixture
def small_params(rng):
    return {
        "c1.weight": rng.normal(size=(2, 1, 3)),
        "c1.bias": rng.normal(size=2) * 0.1,
        "d1.weight": rng.normal(size=(4, 6)),
        "d1.bias": rng.normal(size=4) * 0.1,
        "d2.weight": rng.normal(size=(3, 4)),
        "d2.bias": rng.normal(size=3) * 0.1,
    }
