import pytest

from hybrag.config import RunConfig, interpolate, load_config, require_path
from hybrag.errors import ConfigError
from hybrag.rerank import FusionStrategy
from conftest import write_config


def test_defaults():
    cfg = load_config(None)
    assert cfg.fusion.strategy() == FusionStrategy.weighted(0.7)
    assert cfg.bm25.params().k1 == 1.2 and cfg.bm25.params().b == 0.75
    assert cfg.generation.confidence_threshold == 0.1
    assert cfg.generation.context_budget == 8000
    assert cfg.encoder.kind == "local_test" and cfg.encoder.dim == 256


def test_unknown_keys_rejected(tmp_path):
    p = write_config(tmp_path / "c.yaml", fusion={"kind": "rrf", "weight": 2})
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert "weight" in str(exc.value)
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path / "d.yaml", retreival={"k": 3}))


def test_out_of_range_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path / "c.yaml", fusion={"alpha": 1.5}))


def test_env_interpolation(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("backend:\n  kind: http\n  endpoint: ${LLM_URL}\n  model: ${LLM_MODEL:-small}\n")
    cfg = load_config(p, env={"LLM_URL": "http://x.test"})
    assert cfg.backend.endpoint == "http://x.test" and cfg.backend.model == "small"
    with pytest.raises(ConfigError) as exc:
        load_config(p, env={})
    assert "LLM_URL" in str(exc.value)


def test_interpolate_nested():
    tree = {"a": ["${X}", {"b": "pre-${Y:-d}"}], "n": 3}
    assert interpolate(tree, {"X": "1"}) == {"a": ["1", {"b": "pre-d"}], "n": 3}


def test_relative_paths_resolve_against_config_dir(tmp_path):
    sub = tmp_path / "conf"
    sub.mkdir()
    p = write_config(sub / "c.yaml", corpus={"corpus": "data/corpus.jsonl"}, index={"dir": "/abs/idx"})
    cfg = load_config(p)
    assert cfg.corpus.corpus == sub / "data" / "corpus.jsonl"
    assert str(cfg.index.dir) == "/abs/idx"


def test_missing_or_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_require_path(tmp_path):
    with pytest.raises(ConfigError, match="corpus is not configured"):
        require_path(None, "corpus")
    with pytest.raises(ConfigError, match="missing.jsonl"):
        require_path(tmp_path / "missing.jsonl", "corpus")


def test_fusion_strategies():
    cfg = RunConfig()
    cfg.fusion.kind = "rrf"
    assert cfg.fusion.strategy() == FusionStrategy.rrf(60.0)
    cfg.fusion.kind = "semantic_only"
    assert cfg.fusion.strategy().kind == "semantic_only"
