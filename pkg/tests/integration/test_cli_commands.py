"""
End-to-end runs of the `run` and `train` commands on small documents.
"""

import json
import logging

import numpy as np
import polars as pl
import pytest

from src.interfaces.cli.commands import CHECKPOINT_FILE, LOSS_HISTORY_FILE
from src.interfaces.cli.mappers import NetworkMapper
from src.interfaces.cli.schemas import NetworkCheckpoint
from src.main import main

TRAIN_OVERRIDES = [
    "d=16", "m=8", "k=2", "train_samples=40", "layers=2", "reference_iterations=20",
    "training.epochs=2", "training.batch_size=10", "training.validation_fraction=0.25",
]


@pytest.fixture(autouse=True)
def restore_root_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers = handlers
    root.setLevel(level)


@pytest.mark.integration
class TestRunCommand:

    def test_run_with_config_file_and_overrides(self, tmp_path):
        config = tmp_path / "width.json"
        config.write_text(json.dumps({"width_table": {"tree_levels": [4], "ks": [2], "samples": 40}}))
        out = tmp_path / "out"
        code = main(["run", "width-table", "--config", str(config), "--seed", "5", "--out", str(out),
                     "--set", "width_table.samples=30"])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 5
        assert manifest["config"]["width_table"]["samples"] == 30
        assert pl.read_csv(out / "width_table.csv")["samples"].to_list()[:2] == [30, 30]

    def test_unknown_config_key_is_a_usage_error(self, tmp_path):
        assert main(["run", "tree", "--out", str(tmp_path), "--set", "tree.depth=3"]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "tree", "--config", str(tmp_path / "missing.json")]) == 1


@pytest.mark.integration
class TestTrainCommand:

    def test_writes_checkpoint_and_history(self, tmp_path):
        overrides = [item for value in TRAIN_OVERRIDES for item in ("--set", value)]
        assert main(["train", "--out", str(tmp_path), "--seed", "1", *overrides]) == 0

        document = json.loads((tmp_path / CHECKPOINT_FILE).read_text())
        assert "lambda" in document and document["T"] == 2
        network = NetworkMapper.checkpoint_to_entity(NetworkCheckpoint.model_validate(document))
        assert network.A.shape == (16, 8)
        assert network.U.shape == (16, 16)
        assert np.isfinite(network.U).all()

        history = pl.read_csv(tmp_path / LOSS_HISTORY_FILE)
        assert history.columns == ["epoch", "train_loss", "val_loss", "lr"]
        assert history["epoch"].to_list() == [0, 1, 2]
