import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsegan.config import (
    SCHEMA,
    build_config,
    bundled_config_path,
    default_config,
    parse_config,
    parse_config_text,
)
from pulsegan.errors import ConfigError
from pulsegan.losses import LossWeights


class TestDefaults:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.cfg"
        p.write_text("")
        cfg = parse_config(p)
        assert cfg["loss.lambda"] == 10.0 and cfg["loss.beta"] == 10.0
        assert cfg["train.lr"] == 0.001
        assert cfg["train.epochs"] == 30
        assert cfg.band == (0.7, 4.0)
        assert cfg == default_config()

    def test_every_key_materialized(self):
        assert list(default_config().as_dict()) == list(SCHEMA)

    def test_train_config(self):
        tc = default_config().train_config("dae")
        assert tc.mode == "dae"
        assert tc.weights == LossWeights(10.0, 10.0)
        assert (tc.factor, tc.patience, tc.batch_size) == (0.1, 3, 8)

    def test_bundled_smoke(self):
        cfg = parse_config(bundled_config_path("smoke"))
        assert cfg["corpus.subjects_per_family"] == (2, 1, 1)
        assert bundled_config_path("nonexistent") is None


class TestErrors:
    @pytest.mark.parametrize("text,key", [
        ("train.lr = -1", "train.lr"),
        ("train.lr = abc", "train.lr"),
        ("train.factor = 1.5", "train.factor"),
        ("train.modes = pulsegan, gan", "train.modes"),
        ("signal.band_lo = 5", "signal.band_hi"),
        ("signal.band_hi = 20", "signal.band_hi"),
        ("net.kernel = 4", "net.kernel"),
        ("net.padded_len = 330", "net.padded_len"),
        ("net.window_len = 256\nnet.padded_len = 256", "net.window_len"),
        ("corpus.subjects_per_family = 3, 3", "corpus.subjects_per_family"),
        ("corpus.test_family = narrow\ncorpus.families = broad, bimodal\n"
         "corpus.subjects_per_family = 1, 1", "corpus.test_family"),
        ("corpus.protocol = mixed", "corpus.protocol"),
        ("train.bogus = 1", "train.bogus"),
        ("train.lr = 0.1\ntrain.lr = 0.2", "train.lr"),
    ])
    def test_names_offending_key(self, text, key):
        with pytest.raises(ConfigError) as exc:
            parse_config_text(text)
        assert exc.value.key == key
        assert key in str(exc.value)

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="section.key"):
            parse_config_text("just some words")

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# header\n\ntrain.epochs = 2  # short run\n")
        assert cfg["train.epochs"] == 2


class TestRoundTrip:
    def test_defaults(self):
        cfg = default_config()
        assert parse_config_text(cfg.dumps()) == cfg

    @settings(max_examples=40, deadline=None)
    @given(lr=st.floats(1e-6, 1.0), lam=st.floats(0, 100), epochs=st.integers(1, 500),
           seed=st.integers(0, 2 ** 31), fams=st.permutations(["broad", "bimodal", "narrow"]))
    def test_materialized_reparses_identically(self, lr, lam, epochs, seed, fams):
        cfg = build_config({"train.lr": lr, "loss.lambda": lam, "train.epochs": epochs,
                            "run.seed": seed, "corpus.families": tuple(fams)})
        back = parse_config_text(cfg.dumps())
        assert back == cfg
        assert back.dumps() == cfg.dumps()

    def test_with_seed(self):
        assert default_config().with_seed(7).seed == 7
