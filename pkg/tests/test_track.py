import numpy as np
import pytest

from apexgame import track as tr


def write_lines(path, rows, header=tr.CSV_HEADER):
    with open(path, "w") as fh:
        fh.write("# comment line\n")
        fh.write(header + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")


def test_load_three_row_straight(tmp_path):
    p = tmp_path / "straight3.csv"
    write_lines(p, [(0, 0, 0, 100), (100, 0, 0, 100), (200, 0, 0, 100)])
    t = tr.load_track(p)
    assert t.length == 200.0
    assert t.n_nodes == 3
    assert np.all(t.v_max == 100.0)


def test_load_rejects_non_monotone_s(tmp_path):
    p = tmp_path / "bad.csv"
    write_lines(p, [(0, 0, 0, 90), (50, 0, 0, 90), (40, 0, 0, 90)])
    with pytest.raises(tr.TrackValidationError):
        tr.load_track(p)


def test_load_rejects_nonpositive_vmax(tmp_path):
    p = tmp_path / "bad.csv"
    write_lines(p, [(0, 0, 0, 90), (50, 0, 0, 0.0), (100, 0, 0, 90)])
    with pytest.raises(tr.TrackValidationError):
        tr.load_track(p)


def test_load_rejects_malformed_rows(tmp_path):
    p = tmp_path / "bad.csv"
    with open(p, "w") as fh:
        fh.write(tr.CSV_HEADER + "\n0,0,0,100\n50,zero,0,100\n")
    with pytest.raises(tr.TrackFormatError):
        tr.load_track(p)
    p2 = tmp_path / "bad2.csv"
    with open(p2, "w") as fh:
        fh.write(tr.CSV_HEADER + "\n0,0,0\n")
    with pytest.raises(tr.TrackFormatError):
        tr.load_track(p2)
    p3 = tmp_path / "bad3.csv"
    with open(p3, "w") as fh:
        fh.write("s,g,a,v\n0,0,0,100\n")
    with pytest.raises(tr.TrackFormatError):
        tr.load_track(p3)


def test_bahrain_like_file_round_trip_length(tmp_path):
    t = tr.synth_track("bahrain_like", 540)
    assert t.length == pytest.approx(5412.0, abs=1e-9)
    p = tmp_path / "bahrain_like.csv"
    tr.write_track(t, p)
    t2 = tr.load_track(p)
    assert t2.length == 5412.0
    # full-precision CSV round-trips bit-identically
    assert np.array_equal(t.s, t2.s)
    assert np.array_equal(t.gamma, t2.gamma)
    assert np.array_equal(t.alpha, t2.alpha)
    assert np.array_equal(t.v_max, t2.v_max)


def test_synth_straight():
    t = tr.synth_track("straight", 100)
    assert np.all(t.gamma == 0.0)
    assert np.all(t.alpha == 0.0)
    assert np.unique(t.v_max).size == 1


def test_synth_two_straight_loop_has_two_top_speed_runs():
    t = tr.synth_track("two_straight_loop", 200)
    top = t.v_max == t.v_max.max()
    # count maximal runs of consecutive top-speed nodes
    runs = int(np.sum(top[1:] & ~top[:-1]) + (1 if top[0] else 0))
    assert runs == 2


def test_synth_unknown_kind():
    with pytest.raises(ValueError, match="unknown track kind"):
        tr.synth_track("monaco", 50)


def test_synth_min_nodes():
    with pytest.raises(ValueError):
        tr.synth_track("straight", 9)


def test_resample_idempotent_on_uniform_grid():
    t = tr.synth_track("bahrain_like", 271)
    t2 = tr.resample(t, 271)
    assert np.max(np.abs(t2.s - t.s)) < 1e-12
    assert np.max(np.abs(t2.v_max - t.v_max)) < 1e-12
    assert np.max(np.abs(t2.gamma - t.gamma)) < 1e-12


def test_resample_straight_stays_straight():
    t = tr.synth_track("straight", 50)
    for n in (10, 33, 400):
        r = tr.resample(t, n)
        assert np.all(r.gamma == 0.0)
        assert r.length == t.length


def test_resample_midpoint_is_mean_of_neighbors():
    s = np.array([0.0, 10.0, 20.0])
    vmax = np.array([50.0, 80.0, 60.0])
    t = tr.TrackData("toy", s, np.zeros(3), np.zeros(3), vmax)
    r = tr.resample(t, 41)  # spacing 0.5 m: nodes at 5.0 and 15.0 exist
    assert r.v_max[10] == pytest.approx(0.5 * (50.0 + 80.0))
    assert r.v_max[30] == pytest.approx(0.5 * (80.0 + 60.0))


def test_resample_preserves_length_and_vmax_envelope():
    t = tr.synth_track("bahrain_like", 541)
    for n in (123, 977):
        r = tr.resample(t, n)
        assert r.length == t.length
        assert r.v_max.max() <= t.v_max.max() + 1e-12
        assert r.v_max.min() >= t.v_max.min() - 1e-12


def test_track_data_is_immutable():
    t = tr.synth_track("straight", 20)
    with pytest.raises(ValueError):
        t.v_max[0] = 1.0


def test_validation_alpha_bound():
    s = np.linspace(0, 100, 12)
    with pytest.raises(tr.TrackValidationError):
        tr.TrackData("bad", s, np.zeros(12), np.full(12, 1.6), np.full(12, 50.0))
