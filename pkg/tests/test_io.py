import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hartleysr.io import (FORMAT_VERSION, MAGIC, ConfigError, ModelFile, ModelFormatError,
                          load_model, model_from_bytes, model_to_bytes, parse_config,
                          read_matrix_csv, save_model, write_matrix_csv)
from hartleysr.network import NetworkArch, NetworkParams
from hartleysr.training import LossKind


def random_model(seed, arch=None):
    rng = np.random.default_rng(seed)
    if arch is None:
        N = int(rng.integers(0, 3))
        arch = NetworkArch(int(rng.integers(1, 4)), int(rng.integers(1, 4)), N,
                           int(rng.integers(2 * N + 1, 12)), int(rng.integers(2 * N + 1, 12)))
    L, K, n = arch.num_layers, arch.kernels_per_layer, arch.kernel_size
    H, W = arch.shape
    params = NetworkParams(rng.standard_normal((L, K, H, W)), rng.standard_normal((L, K, H, W)),
                           rng.standard_normal((L, K, n, n)), rng.standard_normal(L),
                           rng.standard_normal((H, W)) * 1e-300)
    return ModelFile(params, int(rng.integers(2, 5)), list(LossKind)[seed % 3], bool(seed % 2))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_model_roundtrip_property(seed):
    model = random_model(seed)
    back = model_from_bytes(model_to_bytes(model))
    assert back.params == model.params
    assert (back.upscale, back.loss_kind, back.tie_symmetric_weights) == (
        model.upscale, model.loss_kind, model.tie_symmetric_weights)
    assert model_to_bytes(back) == model_to_bytes(model)


def test_save_load_file(tmp_path):
    model = random_model(3)
    save_model(tmp_path / "m.hsrn", model)
    assert load_model(tmp_path / "m.hsrn").params == model.params
    assert (tmp_path / "m.hsrn").read_bytes()[:4] == MAGIC


def test_special_values_roundtrip():
    model = random_model(1)
    model.params.W.flat[0] = -0.0
    model.params.W.flat[1] = 5e-324
    back = model_from_bytes(model_to_bytes(model))
    assert np.signbit(back.params.W.flat[0])
    assert back.params.W.flat[1] == 5e-324


@pytest.mark.parametrize("mutate", [
    lambda b: b"XSRN" + b[4:],
    lambda b: b[:4] + (FORMAT_VERSION + 1).to_bytes(2, "little") + b[6:],
    lambda b: b[:-8],
    lambda b: b + b"\0" * 8,
    lambda b: b[:10],
    lambda b: b[:6] + (0).to_bytes(4, "little") + b[10:],
    lambda b: b[:30] + bytes([9]) + b[31:],
])
def test_corrupt_models_rejected(mutate):
    with pytest.raises(ModelFormatError):
        model_from_bytes(mutate(model_to_bytes(random_model(0))))


def test_matrix_csv_roundtrip(tmp_path):
    m = np.random.default_rng(0).standard_normal((3, 5)) * 10.0 ** np.arange(-2, 3)
    write_matrix_csv(tmp_path / "m.csv", m)
    assert np.array_equal(read_matrix_csv(tmp_path / "m.csv"), m)


CONFIG = """
# small run
num_layers = 2
kernels_per_layer = 3
half_width = 1
height = 32
width = 32
loss = exp_l2
beta = 0.02
tie_symmetric_weights = yes
dataset_dir = data/train   # relative to the config
"""


def test_parse_config(tmp_path):
    cfg = parse_config(CONFIG, base_dir=str(tmp_path))
    assert cfg.arch == NetworkArch(2, 3, 1, 32, 32)
    tcfg = cfg.training_config()
    assert tcfg.loss_kind is LossKind.EXP_L2 and tcfg.beta == 0.02
    assert tcfg.tie_symmetric_weights is True
    assert tcfg.theta == 1e3 and tcfg.gamma == 1e-5
    assert cfg.path("dataset_dir") == str(tmp_path / "data" / "train")


@pytest.mark.parametrize("text, line", [
    ("dataset_dir = x\nbogus = 1", 2),
    ("dataset_dir = x\nseed = 1\nseed = 2", 3),
    ("dataset_dir = x\nnum_layers = three", 2),
    ("dataset_dir = x\njust words", 2),
    ("dataset_dir = x\ntie_symmetric_weights = maybe", 2),
])
def test_config_errors_name_the_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_config_semantic_errors():
    with pytest.raises(ConfigError):
        parse_config("num_layers = 2")
    with pytest.raises(ConfigError):
        parse_config("dataset_dir = x\nhalf_width = 50")
    with pytest.raises(ConfigError):
        parse_config("dataset_dir = x\nloss = huber")
