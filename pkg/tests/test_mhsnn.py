import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biomotion import mhsnn
from biomotion.bench import direction_sequence
from biomotion.mhsnn import MhsnnError, MhsnnNetwork, ResumeParams


def brute_force_counts(l, w, m_f, f=3):
    """Walk every layer and receptive field one unit at a time."""
    neurons = synapses = 0
    for _ in range((l - 2) * (w - 2)):
        neurons += 1
        synapses += f * f
    for _ in range(m_f):
        for _ in range((l - 4) * (w - 4)):
            neurons += 1  # layer 2 feature map unit
            synapses += f * f
            for _ in ("A", "B"):
                neurons += 1
                synapses += f * f
            synapses += 4  # one weight from each source population into its cell
    neurons += m_f
    return neurons, synapses


class TestTopology:
    def test_forty_by_forty(self):
        t = mhsnn.topology_counts(40, 40, 4, 3, 3)
        assert (t.n_neurons, t.n_synapses) == (17000, 173700)

    def test_smallest(self):
        assert mhsnn.topology_counts(5, 5, 1, 3, 3).n_neurons == 13

    def test_no_features(self):
        assert mhsnn.topology_counts(9, 7, 0).n_neurons == 7 * 5

    def test_too_small(self):
        with pytest.raises(MhsnnError):
            mhsnn.topology_counts(4, 10)
        with pytest.raises(MhsnnError):
            MhsnnNetwork(10, 4)

    @pytest.mark.parametrize("m_f", [1, 4])
    def test_matches_construction(self, m_f):
        for l in range(5, 13):
            for w in range(5, 13):
                t = mhsnn.topology_counts(l, w, m_f)
                assert (t.n_neurons, t.n_synapses) == brute_force_counts(l, w, m_f)
                net = MhsnnNetwork(l, w, m_f=m_f)
                assert (net.neuron_count(), net.synapse_count()) == (t.n_neurons, t.n_synapses)


class TestForward:
    def test_encode_threshold(self):
        assert mhsnn.encode_input(np.array([0.85, 0.849, 0.0])).tolist() == [True, False, False]

    def test_blank_sequence_silent(self):
        net = MhsnnNetwork(12, 12)
        res = net.forward([np.zeros((12, 12))] * 6)
        for layer in (res.input, res.l1, res.l2, res.l3, res.l4):
            assert not layer.any()

    def test_static_scene_quiet_after_two_frames(self):
        seq = direction_sequence("right", seed=4, size=30, n_frames=8)
        net = MhsnnNetwork(30, 30)
        res = net.forward([seq.frames[0]] * 8)
        assert res.l2.any()
        assert not res.l3[2:].any()
        assert not res.l4[2:].any()

    def test_moving_object_drives_own_population(self):
        seq = direction_sequence("right", seed=4, size=30, n_frames=8)
        net = MhsnnNetwork(30, 30)
        res = net.forward(seq.frames)
        per_dir = res.l3[2:].sum(axis=(0, 1, 3))
        assert per_dir[net.directions.index("right")] > per_dir[net.directions.index("left")]

    def test_frame_shape_checked(self):
        with pytest.raises(MhsnnError):
            MhsnnNetwork(10, 10).forward([np.zeros((10, 11))])

    @settings(max_examples=10)
    @given(st.integers(0, 10_000), st.sampled_from(["left", "right", "up", "down"]))
    def test_mirror_swaps_horizontal_feature_maps(self, seed, label):
        seq = direction_sequence(label, seed=seed, size=24, n_frames=6)
        net = MhsnnNetwork(24, 24)
        _, _, r2, _ = net.features(seq.frames)
        _, _, f2, _ = net.features(seq.flipped().frames)
        shape = (len(seq.frames), *net.pos_shape)
        idx = {d: k for k, d in enumerate(net.directions)}
        for a, b in (("left", "right"), ("right", "left"), ("up", "up"), ("down", "down")):
            want = r2[:, idx[a]].reshape(shape)[:, :, ::-1]
            assert np.array_equal(f2[:, idx[b]].reshape(shape), want)


class TestResume:
    def test_window_examples(self):
        p = ResumeParams()
        assert mhsnn.resume_window(-1.0, "excitatory", p) == 0.0
        assert mhsnn.resume_window(0.0, "excitatory", p) == 0.0
        assert mhsnn.resume_window(p.tau_d, "excitatory", p) == pytest.approx(p.a_d * math.exp(-1))
        assert mhsnn.resume_window(p.tau_d, "inhibitory", p) == pytest.approx(-p.a_d * math.exp(-1))

    def test_teacher_equals_output(self):
        for flag in (True, False):
            assert mhsnn.resume_delta([4.0], 5.0, flag, flag) == 0.0

    def test_teacher_without_output_potentiates(self):
        up = mhsnn.resume_delta([4.0], 5.0, out_spike=False, teacher_spike=True)
        down = mhsnn.resume_delta([4.0], 5.0, out_spike=True, teacher_spike=False)
        assert up > 0 and down == -up

    @given(
        st.lists(st.floats(0, 50), max_size=5),
        st.booleans(),
        st.booleans(),
        st.sampled_from(["excitatory", "inhibitory"]),
    )
    def test_antisymmetry(self, times, out, teacher, kind):
        a = mhsnn.resume_delta(times, 50.0, out, teacher, kind)
        b = mhsnn.resume_delta(times, 50.0, teacher, out, kind)
        assert a == -b

    def test_future_spike_rejected(self):
        with pytest.raises(MhsnnError):
            mhsnn.resume_delta([6.0], 5.0, False, True)
        with pytest.raises(MhsnnError):
            ResumeParams(tau_d=0)

    def test_step_clamps_at_zero(self):
        w = mhsnn.resume_step([0.001, 1.0], [[4.0], [4.0]], 5.0, True, False)
        assert w[0] == 0.0 and w[1] < 1.0

    @settings(max_examples=25)
    @given(st.integers(0, 2**32 - 1))
    def test_kernel_matches_scalar_rule(self, seed):
        rng = np.random.default_rng(seed)
        net = MhsnnNetwork(5, 5)  # one position per population
        t_n = 6
        raster = rng.random((t_n, net.n_l3)) < 0.5
        teacher = np.zeros((t_n, 4), dtype=np.uint8)
        teacher[1:, 0] = 1
        p = ResumeParams(a_l=0.02, tau_l=10.0)
        out = mhsnn.run_detectors(net, raster, teacher, p, learn=np.array([1, 0, 0, 0]))
        assert not out.any()  # four unit weights cannot reach the detector threshold
        kinds = ["excitatory", "excitatory", "inhibitory", "inhibitory"]
        w = np.ones(4)
        for t in range(1, t_n):
            times = [np.flatnonzero(raster[: t + 1, pop]).astype(float) for pop in net.cell_pops[0]]
            w = mhsnn.resume_step(w, times, float(t), False, True, kinds, p)
        assert np.allclose(net.weights_l4[0], w, rtol=0, atol=1e-12)
        assert (net.weights_l4[1:] == 1.0).all()


class TestTraining:
    def test_zero_iterations(self):
        net = MhsnnNetwork(20, 20)
        net.weights_l4[:] = 7.0
        mhsnn.train(net, [direction_sequence("up", 1, 20, 6)], iterations=0)
        assert (net.weights_l4 == 1.0).all()

    def test_deterministic(self):
        seqs = [direction_sequence(d, s, 20, 6) for s, d in enumerate(["left", "right", "up", "down"])]
        a = mhsnn.train(MhsnnNetwork(20, 20), seqs, iterations=3)
        b = mhsnn.train(MhsnnNetwork(20, 20), seqs, iterations=3)
        assert np.array_equal(a.weights_l4, b.weights_l4)

    def test_sequential_schedule_freezes_vertical_first(self):
        seqs = [direction_sequence(d, s, 20, 6) for s, d in enumerate(["left", "right", "up", "down"])]
        log = []
        net = mhsnn.train(MhsnnNetwork(20, 20), seqs, iterations=4, schedule="sequential", log=log)
        vert = [net.directions.index(d) for d in ("up", "down")]
        assert (log[1][vert] == 1.0).all()
        assert (log[3][vert] != 1.0).any()

    def test_unlabelled_rejected(self):
        with pytest.raises(MhsnnError):
            mhsnn.teacher_train("none", 5, ("left",))

    def test_teacher_starts_on_second_frame(self):
        t = mhsnn.teacher_train("rightwards", 4, ("left", "right", "up", "down"))
        assert t.tolist() == [[0, 0, 0, 0], [0, 1, 0, 0], [0, 1, 0, 0], [0, 1, 0, 0]]


class TestDecide:
    dirs = ("left", "right", "up", "down")

    def test_silent(self):
        assert mhsnn.decide([0, 0, 0, 0], self.dirs) == "none"

    def test_tie(self):
        assert mhsnn.decide([3, 3, 0, 1], self.dirs) == "none"

    def test_winner(self):
        assert mhsnn.decide([1, 4, 0, 2], self.dirs) == "rightwards"
        assert mhsnn.decide([1, 4, 0, 2], self.dirs, "vertical") == "downwards"

    def test_blank_classifies_none(self):
        net = MhsnnNetwork(10, 10)
        assert mhsnn.classify(net, [np.zeros((10, 10))] * 4, window=2) == ["none", "none"]


class TestCodd:
    def mask_at(self, i, j, shape=(20, 20)):
        m = np.zeros(shape, dtype=np.uint8)
        m[i - 1 : i + 2, j - 1 : j + 2] = 1
        return m

    def test_rightwards(self):
        h, v, cm = mhsnn.codd_direction(self.mask_at(5, 11), (5.0, 8.0))
        assert (h, v) == ("rightwards", "none") and cm == (5.0, 11.0)

    def test_downwards(self):
        assert mhsnn.codd_direction(self.mask_at(8, 5), (6.0, 5.0))[:2] == ("none", "downwards")

    def test_identical(self):
        m = self.mask_at(7, 7)
        assert mhsnn.codd_sequence([m, m]) == [("none", "none"), ("none", "none")]

    def test_empty_carries_centroid(self):
        h, v, cm = mhsnn.codd_direction(np.zeros((5, 5)), (1.0, 2.0))
        assert (h, v, cm) == ("none", "none", (1.0, 2.0))

    @given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-4, 4), st.integers(-4, 4))
    def test_translation_equivariance(self, di, dj, si, sj):
        ra = mhsnn.codd_sequence([self.mask_at(12, 12, (30, 30)), self.mask_at(12 + di, 12 + dj, (30, 30))])[1]
        a = self.mask_at(12 + si, 12 + sj, (30, 30))
        b = self.mask_at(12 + si + di, 12 + sj + dj, (30, 30))
        rb = mhsnn.codd_sequence([a, b])[1]
        expected_h = "rightwards" if dj > 0 else "leftwards" if dj < 0 else "none"
        expected_v = "downwards" if di > 0 else "upwards" if di < 0 else "none"
        assert ra == rb == (expected_h, expected_v)


class TestPcc:
    @pytest.mark.parametrize("tp,fp,want", [(93, 7, (93.0, 7.0)), (1, 0, (100.0, 0.0)), (0, 1, (0.0, 100.0))])
    def test_examples(self, tp, fp, want):
        assert mhsnn.pcc_pwc(tp, fp) == want

    @given(st.integers(0, 10**6), st.integers(0, 10**6))
    def test_sums_to_hundred(self, tp, fp):
        if tp + fp == 0:
            with pytest.raises(MhsnnError):
                mhsnn.pcc_pwc(tp, fp)
        else:
            pcc, pwc = mhsnn.pcc_pwc(tp, fp)
            assert pcc + pwc == pytest.approx(100.0)


class TestWeightsIo:
    def test_round_trip(self, tmp_path):
        w = np.random.default_rng(0).random((4, 36))
        mhsnn.save_weights(tmp_path / "w.bin", w)
        data = (tmp_path / "w.bin").read_bytes()
        assert data[:4] == b"MHSN" and len(data) == 16 + 8 * w.size
        assert np.array_equal(mhsnn.load_weights(tmp_path / "w.bin").reshape(w.shape), w)

    @pytest.mark.parametrize("mutate", ["magic", "version", "truncate", "short"])
    def test_bad_file(self, tmp_path, mutate):
        mhsnn.save_weights(tmp_path / "w.bin", np.ones(3))
        data = bytearray((tmp_path / "w.bin").read_bytes())
        if mutate == "magic":
            data[:4] = b"XXXX"
        elif mutate == "version":
            data[4] = 9
        elif mutate == "truncate":
            data = data[:-8]
        else:
            data = data[:10]
        (tmp_path / "w.bin").write_bytes(bytes(data))
        with pytest.raises(MhsnnError):
            mhsnn.load_weights(tmp_path / "w.bin")

    def test_csv_export(self, tmp_path):
        net = MhsnnNetwork(6, 6)
        mhsnn.export_weights_csv(tmp_path / "w.csv", net)
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == "cell,group,position,weight"
        assert len(lines) == 1 + net.weights_l4.size
