"""Session fixtures: the trained desk-scale model registry and a small trained
stitch, cached on disk so repeated pytest runs skip retraining. Delete
tests/.fixture_cache to force a rebuild."""

import sys
from pathlib import Path

import pytest

from stitchviz.core import config_hash
from stitchviz.data import TextureDataset
from stitchviz.models.fixtures import build_fixtures
from stitchviz.models.registry import ModelRegistry
from stitchviz.stitch import StitchTrainingConfig, load_stitch, save_stitch, train_stitch

FIXTURE_CONFIG = {
    "seed": 0,
    "train_size": 1000,
    "res": 128,
    "encoder_epochs": 2,
    "decoder_passes": 1,
    "cache_version": 1,
}

MINI_STITCH_CONFIG = {"epochs": 2, "train_size": 240, "val_size": 48, "seed": 5}


def _cache_root() -> Path:
    key = config_hash({**FIXTURE_CONFIG, "mini": MINI_STITCH_CONFIG})[:12]
    return Path(__file__).parent / ".fixture_cache" / key


@pytest.fixture(scope="session")
def registry() -> ModelRegistry:
    root = _cache_root()
    manifest = root / "registry.json"
    if not manifest.exists():
        print("\n[conftest] building desk-scale fixtures (one-time, cached)...",
              file=sys.stderr)
        cfg = {k: v for k, v in FIXTURE_CONFIG.items() if k != "cache_version"}
        build_fixtures(root, **cfg, log=lambda m: print(f"[fixtures] {m}", file=sys.stderr))
    return ModelRegistry(manifest)


@pytest.fixture(scope="session")
def interpret_enc(registry):
    return registry.encoder(registry.role("interpret"))


@pytest.fixture(scope="session")
def test_enc(registry):
    return registry.encoder(registry.role("test"))


@pytest.fixture(scope="session")
def upsampler(registry):
    return registry.generator("desk_upsampler")


@pytest.fixture(scope="session")
def unet(registry):
    return registry.generator("desk_unet")


@pytest.fixture(scope="session")
def mini_stitch_path(registry, interpret_enc, test_enc, upsampler) -> Path:
    """A lightly trained stage2 -> b16.conv0 stitch for functional tests."""
    path = _cache_root() / "stitches" / "mini_stage2"
    if not (path.parent / "mini_stage2.json").exists():
        print("\n[conftest] training mini stitch (one-time, cached)...", file=sys.stderr)
        cfg = MINI_STITCH_CONFIG
        train = TextureDataset(cfg["train_size"], 128, seed=11)
        val = TextureDataset(cfg["val_size"], 128, seed=12)
        stitch, _ = train_stitch(
            interpret_enc, "stage2", upsampler, "b16.conv0", train,
            StitchTrainingConfig(epochs=cfg["epochs"], seed=cfg["seed"]), val,
            test_enc=test_enc, test_layer="stage2",
            log=lambda m: print(f"[mini-stitch] {m}", file=sys.stderr),
        )
        stitch.metadata["registry_hash"] = registry.registry_hash()
        save_stitch(stitch, path)
    return path.parent / "mini_stage2.json"


@pytest.fixture(scope="session")
def mini_stitch(mini_stitch_path, registry):
    return load_stitch(mini_stitch_path, registry=registry)
