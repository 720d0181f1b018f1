import numpy as np
import pytest

from pa_aware_alloc import ChannelFormatError, ChannelSpec, generate, read_channel, write_channel
from pa_aware_alloc.channels import derive_seed, multipath, numerical_rank


def _write(tmp_path, text, name="h.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestSpec:
    @pytest.mark.parametrize("kwargs", [
        dict(kind="foo", n_r=2, n_t=2),
        dict(kind="rayleigh", n_r=0, n_t=2),
        dict(kind="multipath", n_r=4, n_t=4, n_paths=0),
        dict(kind="multipath", n_r=4, n_t=3, n_paths=4),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ChannelSpec(**kwargs)


class TestRayleigh:
    def test_mean_frobenius(self):
        norms = [np.sum(np.abs(generate(ChannelSpec("rayleigh", 32, 32, seed=s))) ** 2)
                 for s in range(200)]
        assert np.mean(norms) == pytest.approx(1024, rel=0.05)

    def test_entry_variance(self):
        H = generate(ChannelSpec("rayleigh", 64, 64, seed=5))
        assert np.var(H.real) + np.var(H.imag) == pytest.approx(1.0, rel=0.1)
        assert np.var(H.real) == pytest.approx(0.5, rel=0.1)

    def test_deterministic(self):
        a = generate(ChannelSpec("rayleigh", 8, 4, seed=42))
        b = generate(ChannelSpec("rayleigh", 8, 4, seed=42))
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, generate(ChannelSpec("rayleigh", 8, 4, seed=43)))


class TestMultipath:
    @pytest.mark.parametrize("seed", range(5))
    def test_rank(self, seed):
        H = generate(ChannelSpec("multipath", 32, 32, seed=seed, n_paths=5))
        assert numerical_rank(H) == 5

    def test_normalization(self):
        norms = [np.sum(np.abs(generate(ChannelSpec("multipath", 16, 16, seed=s, n_paths=4))) ** 2)
                 for s in range(100)]
        assert np.mean(norms) == pytest.approx(256, rel=0.1)

    def test_zero_paths(self):
        H = multipath(4, 3, 0, np.random.default_rng(0))
        assert H.shape == (4, 3) and not np.any(H)
        assert numerical_rank(H) == 0


class TestSeeds:
    def test_derivation(self):
        assert derive_seed(0, "channel", 0) != derive_seed(0, "rank", 0)
        assert derive_seed(7, "cell", 3) == derive_seed(7, "cell", 0) + 3
        assert 0 <= derive_seed(-1, "channel", 5) < 2**64


class TestFileFormat:
    def test_identity_round_trip(self, tmp_path):
        path = tmp_path / "eye.csv"
        write_channel(np.eye(2), path)
        assert path.read_text().splitlines()[0] == "# rows=2 cols=2"
        np.testing.assert_array_equal(read_channel(path), np.eye(2))

    @pytest.mark.parametrize("kind, n_paths", [("rayleigh", 1), ("multipath", 3)])
    def test_bitwise_round_trip(self, tmp_path, kind, n_paths):
        H = generate(ChannelSpec(kind, 7, 5, seed=11, n_paths=n_paths))
        path = tmp_path / "h.csv"
        write_channel(H, path)
        assert read_channel(path).tobytes() == H.tobytes()

    def test_too_many_entries(self, tmp_path):
        path = _write(tmp_path, "# rows=2 cols=2\n1:0,0:0\n0:0,1:0,2:0\n")
        with pytest.raises(ChannelFormatError, match=r":3: expected 2 entries, found 3"):
            read_channel(path)

    def test_row_count(self, tmp_path):
        path = _write(tmp_path, "# rows=2 cols=2\n1:0,0:0\n0:0,1:0\n1:1,1:1\n")
        with pytest.raises(ChannelFormatError, match="declares 2 rows, found 3"):
            read_channel(path)

    @pytest.mark.parametrize("header", ["rows=2 cols=2", "# rows=2", "# rows=0 cols=2", ""])
    def test_bad_header(self, tmp_path, header):
        path = _write(tmp_path, header + "\n1:0,0:0\n0:0,1:0\n")
        with pytest.raises(ChannelFormatError):
            read_channel(path)

    @pytest.mark.parametrize("entry", ["abc", "1", "1:2:3", "nan:0", "inf:1"])
    def test_bad_entry(self, tmp_path, entry):
        path = _write(tmp_path, f"# rows=1 cols=2\n1:0,{entry}\n")
        with pytest.raises(ChannelFormatError, match=r":2:2:"):
            read_channel(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_channel(tmp_path / "missing.csv")
