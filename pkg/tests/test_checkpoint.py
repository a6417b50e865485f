import json
from dataclasses import replace

import numpy as np
import pytest

from conftest import TINY_PLAN, toy_pairs
from pulsegan.checkpoint import MAGIC, dumps, load_checkpoint, loads, save_checkpoint
from pulsegan.errors import CheckpointError
from pulsegan.models import to_pm1
from pulsegan.training import GanState, TrainConfig, run_epoch, train_step

CFG = TrainConfig(epochs=3, batch_size=4, plan=TINY_PLAN, seed=11)


def trained_state(mode="pulsegan"):
    st = GanState(replace(CFG, mode=mode))
    p = toy_pairs(12, seed=4)
    run_epoch(st, p.rough, p.ref)
    st.scheduler.step(0.3)
    st.epoch = 1
    return st


class TestRoundTrip:
    @pytest.mark.parametrize("mode", ["pulsegan", "dae"])
    def test_everything_restored(self, tmp_path, mode):
        st = trained_state(mode)
        path = tmp_path / "m.ckpt"
        save_checkpoint(st, path)
        back = load_checkpoint(path)
        assert back.cfg == st.cfg
        assert back.epoch == 1
        assert back.scheduler.state_dict() == st.scheduler.state_dict()
        assert back.rng.bit_generator.state == st.rng.bit_generator.state
        stores = [(st.gen.store, back.gen.store)]
        if mode == "pulsegan":
            stores.append((st.disc.store, back.disc.store))
        else:
            assert back.disc is None
        for a, b in stores:
            for p, q in zip(a, b):
                assert p.step == q.step
                for u, v in [(p.value, q.value), (p.m, q.m), (p.v, q.v)]:
                    np.testing.assert_array_equal(u, v)
            for k in a.buffers:
                np.testing.assert_array_equal(a.buffers[k], b.buffers[k])

    def test_bytes_are_stable(self):
        st = trained_state()
        assert dumps(loads(dumps(st))) == dumps(st)

    def test_load_then_step_matches_uninterrupted(self):
        p = toy_pairs(4, seed=9)
        x, xc = to_pm1(p.rough), to_pm1(p.ref)
        st = trained_state()
        resumed = loads(dumps(st))
        a = train_step(st, x, xc)
        b = train_step(resumed, x, xc)
        for k in ("d_loss", "g_loss"):
            assert abs(a[k] - b[k]) <= 1e-12
        c = train_step(st, x, xc)
        d = train_step(resumed, x, xc)
        assert abs(c["g_loss"] - d["g_loss"]) <= 1e-12


class TestCorruption:
    def test_bad_magic(self):
        with pytest.raises(CheckpointError, match="magic"):
            loads(b"NOT-A-CHECKPOINT\n")

    def test_truncated_payload(self):
        blob = dumps(trained_state())
        with pytest.raises(CheckpointError, match="truncated"):
            loads(blob[:-8])

    def test_flipped_byte(self):
        blob = bytearray(dumps(trained_state()))
        blob[-3] ^= 0xFF
        with pytest.raises(CheckpointError):
            loads(bytes(blob))

    def test_version_mismatch(self):
        blob = dumps(trained_state())
        rest = blob[len(MAGIC):]
        nl = rest.index(b"\n")
        mlen = int(rest[:nl])
        manifest = json.loads(rest[nl + 1:nl + 1 + mlen])
        manifest["header"]["format_version"] = 99
        m = json.dumps(manifest).encode()
        forged = MAGIC + str(len(m)).encode() + b"\n" + m + rest[nl + 1 + mlen:]
        with pytest.raises(CheckpointError, match="version"):
            loads(forged)

    def test_garbled_manifest(self):
        with pytest.raises(CheckpointError, match="manifest"):
            loads(MAGIC + b"12\n{not json...")
