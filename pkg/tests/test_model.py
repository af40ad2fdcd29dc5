import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_noma.model import (EXAMPLE_2X2_CHANNEL, ChannelFormatError, ChannelInstance, awgn_observe, dumps_channel,
                             equivalent_channel, loads_channel, read_channel, sample_iid_gaussian_channel,
                             write_channel)


def test_equivalent_channel_scales_columns():
    ch = ChannelInstance(h=np.ones((2, 3)), powers=[1.0, 4.0, 9.0], noise_var=0.5)
    assert np.allclose(equivalent_channel(ch), [[1, 2, 3], [1, 2, 3]])
    assert (ch.n_r, ch.n_u) == (2, 3)


@pytest.mark.parametrize("kw", [dict(powers=[1.0, -1.0]), dict(noise_var=0.0), dict(powers=[1.0])])
def test_channel_instance_rejects_bad_input(kw):
    with pytest.raises(ValueError):
        ChannelInstance(h=np.ones((2, 2)), **kw)


def test_iid_channel_statistics():
    h = sample_iid_gaussian_channel(200, 200, seed=0)
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02
    assert abs(np.mean(h.real ** 2) - 0.5) < 0.02
    hr = sample_iid_gaussian_channel(200, 200, seed=0, real=True)
    assert np.isrealobj(hr) and abs(np.var(hr) - 1.0) < 0.02


def test_seeded_channel_is_reproducible():
    assert np.array_equal(sample_iid_gaussian_channel(3, 2, seed=7), sample_iid_gaussian_channel(3, 2, seed=7))


def test_awgn_noise_variance():
    h = np.eye(2)
    x = np.zeros((2, 100_000))
    y = awgn_observe(h, x, 0.3, seed=1)
    assert abs(np.mean(np.abs(y) ** 2) - 0.3) < 0.01
    yr = awgn_observe(h, x, 0.3, seed=1, real=True)
    assert np.isrealobj(yr) and abs(np.var(yr) - 0.3) < 0.01


def test_awgn_dimension_mismatch():
    with pytest.raises(ValueError):
        awgn_observe(np.eye(2), np.zeros((3, 4)), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_text_round_trip_is_exact(n_r, n_u, seed):
    h = sample_iid_gaussian_channel(n_r, n_u, seed=seed)
    assert np.array_equal(loads_channel(dumps_channel(h)), h)


def test_file_round_trip(tmp_path):
    p = tmp_path / "h.txt"
    write_channel(p, EXAMPLE_2X2_CHANNEL)
    back = read_channel(p)
    assert np.isrealobj(back) and np.array_equal(back, EXAMPLE_2X2_CHANNEL)


def test_parse_comments_and_i_suffix():
    h = loads_channel("# header\n1+2i  3\n\n4 5-1j  # trailing\n")
    assert np.array_equal(h, [[1 + 2j, 3], [4, 5 - 1j]])


@pytest.mark.parametrize("text,line", [("1 2\n3\n", ":2:"), ("1 x\n", ":1:")])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ChannelFormatError, match=line):
        loads_channel(text, source="f")


def test_empty_file_is_an_error():
    with pytest.raises(ChannelFormatError):
        loads_channel("# nothing\n\n")
