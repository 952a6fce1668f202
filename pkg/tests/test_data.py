import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from signnet.data import (
    JOINT_EDGES,
    JOINT_NAMES,
    POSE_DIM,
    CorpusSample,
    InMemoryDataset,
    ManifestError,
    PoseFormatError,
    SyntheticSpec,
    Vocabulary,
    check_pose_sequence,
    generate_synthetic_corpus,
    load_pose,
    make_batches,
    pad_frames,
    pad_tokens,
    read_manifest,
    save_pose,
    shift_frames,
    word_motifs,
)
from signnet.data.poses import dumps_pose, dumps_pose_binary, loads_pose, loads_pose_binary
from signnet.data.synthetic import word_list
from signnet.losses import mse_loss
from signnet.tensor import Tensor


class TestSkeleton:
    def test_layout(self):
        assert len(JOINT_NAMES) == 50 and len(set(JOINT_NAMES)) == 50
        assert JOINT_NAMES[8] == "left_hand_wrist" and JOINT_NAMES[29] == "right_hand_wrist"

    def test_edges_form_a_tree(self):
        assert len(JOINT_EDGES) == 49
        assert {j for e in JOINT_EDGES for j in e} == set(range(50))


class TestPoseValidation:
    def test_joint_view_accepted(self, rng):
        assert check_pose_sequence(rng.normal(size=(2, 50, 3))).shape == (2, POSE_DIM)

    def test_wrong_width(self):
        with pytest.raises(ValueError, match="frame width 149 ≠ 150"):
            check_pose_sequence(np.zeros((2, 149)))

    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            check_pose_sequence(np.zeros((0, POSE_DIM)))

    def test_nan_names_frame(self):
        x = np.zeros((5, POSE_DIM))
        x[3, 7] = np.nan
        with pytest.raises(ValueError, match="frame 3"):
            check_pose_sequence(x)


class TestPoseFiles:
    @pytest.mark.parametrize("suffix", [".pose", ".psb"])
    def test_round_trip_exact(self, tmp_path, rng, suffix):
        x = rng.normal(size=(4, POSE_DIM)) * 1e3
        x[0, 0] = np.nextafter(1.0, 2.0)
        path = tmp_path / f"a{suffix}"
        save_pose(path, x)
        np.testing.assert_array_equal(load_pose(path), x)

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=POSE_DIM, max_size=POSE_DIM))
    def test_text_round_trip_property(self, values):
        x = np.array([values])
        np.testing.assert_array_equal(loads_pose(dumps_pose(x)), x)

    def test_text_header(self, rng):
        header = json.loads(dumps_pose(rng.normal(size=(2, POSE_DIM))).splitlines()[0])
        assert header == {"format": "POSE", "version": 1, "joints": 50, "dims": 3, "frames": 2}

    def test_binary_layout(self):
        buf = dumps_pose_binary(np.zeros((2, POSE_DIM)))
        assert buf[:4] == b"PSB1" and len(buf) == 12 + 2 * POSE_DIM * 8

    def test_width_149_reports_offset(self, rng):
        text = dumps_pose(rng.normal(size=(2, POSE_DIM)))
        lines = text.split("\n")
        lines[2] = " ".join(lines[2].split()[:149])
        with pytest.raises(PoseFormatError, match="frame width 149 ≠ 150") as exc:
            loads_pose("\n".join(lines))
        assert exc.value.offset == len(lines[0]) + 1 + len(lines[1]) + 1

    def test_nan_in_frame_3(self, rng):
        lines = dumps_pose(rng.normal(size=(5, POSE_DIM))).split("\n")
        row = lines[4].split()
        row[10] = "nan"
        lines[4] = " ".join(row)
        with pytest.raises(PoseFormatError, match="frame 3"):
            loads_pose("\n".join(lines))

    def test_binary_nan_offset(self):
        x = np.zeros((5, POSE_DIM))
        buf = bytearray(dumps_pose_binary(x))
        off = 12 + 8 * (3 * POSE_DIM + 2)
        buf[off : off + 8] = np.array([np.nan], dtype="<f8").tobytes()
        with pytest.raises(PoseFormatError, match="frame 3") as exc:
            loads_pose_binary(bytes(buf))
        assert exc.value.offset == off

    @pytest.mark.parametrize(
        "header, message",
        [
            ("not json", "malformed header"),
            ('{"format":"X","version":1}', "not a POSE header"),
            ('{"dims":3,"format":"POSE","frames":1,"joints":49,"version":1}', "joint layout 49x3"),
            ('{"dims":3,"format":"POSE","frames":2,"joints":50,"version":1}', "header says 2 frames"),
        ],
    )
    def test_malformed_headers(self, header, message):
        with pytest.raises(PoseFormatError, match=message):
            loads_pose(header + "\n" + " ".join(["0"] * POSE_DIM) + "\n")

    def test_binary_truncated(self):
        with pytest.raises(PoseFormatError, match="payload size"):
            loads_pose_binary(dumps_pose_binary(np.zeros((2, POSE_DIM)))[:-8])


class TestVocabulary:
    def test_reserved_ids(self):
        v = Vocabulary.build([["sun", "rain"]])
        assert (v.pad_id, v.bos_id, v.eos_id, v.unk_id) == (0, 1, 2, 3)
        assert v.itos[4:] == ["rain", "sun"]

    @given(st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1))
    def test_round_trip(self, sentence):
        v = Vocabulary.build([["a", "b", "c", "d"]])
        assert v.decode(v.encode(sentence)) == sentence

    def test_unknown(self):
        v = Vocabulary.build([["a"]])
        with pytest.raises(KeyError, match="'z'"):
            v.encode(["z"])
        assert v.encode(["z"], strict=False) == [v.unk_id]
        assert v.unknown(["a", "z"]) == ["z"]

    def test_reserved_collision(self):
        with pytest.raises(ValueError, match="reserved"):
            Vocabulary(["<pad>"])

    def test_from_list(self):
        v = Vocabulary.build([["a", "b"]])
        assert Vocabulary.from_list(v.itos, 4) == v


class TestSynthetic:
    def test_pure_function(self):
        spec = SyntheticSpec(seed=3)
        a, b = generate_synthetic_corpus(spec, 5), generate_synthetic_corpus(spec, 5)
        for x, y in zip(a, b):
            assert x.sentence == y.sentence and np.array_equal(x.pose, y.pose)

    def test_noise_free_same_sentence_same_pose(self):
        spec = SyntheticSpec(vocab_size=2, sentence_len=(1, 1), noise_std=0.0, seed=0)
        corpus = generate_synthetic_corpus(spec, 10)
        by_sentence = {}
        for s in corpus:
            by_sentence.setdefault(s.text, []).append(s.pose)
        repeated = [poses for poses in by_sentence.values() if len(poses) > 1]
        assert repeated
        for poses in repeated:
            for p in poses[1:]:
                np.testing.assert_array_equal(p, poses[0])

    def test_three_words_of_five_frames(self):
        spec = SyntheticSpec(motif_len=(5, 5), sentence_len=(3, 3), seed=0)
        assert all(len(s.pose) == 15 for s in generate_synthetic_corpus(spec, 4))

    def test_confusable_pair_is_close(self):
        spec = SyntheticSpec.with_confusable(4, vocab_size=12, seed=2)
        motifs = word_motifs(spec)
        words = word_list(12)
        for a, b in spec.confusable_pairs:
            dist = np.linalg.norm(motifs[words[a]] - motifs[words[b]], axis=1).mean()
            assert dist <= 0.05 * np.sqrt(150)

    def test_confusable_words_appear(self):
        spec = SyntheticSpec.with_confusable(4, vocab_size=12)
        used = {w for s in generate_synthetic_corpus(spec, 8) for w in s.sentence}
        assert set(word_list(8)) <= used

    def test_gloss_is_injective_and_feasible(self, small_corpus):
        for s in small_corpus:
            assert s.gloss == [w.upper() for w in s.sentence]
            assert len(s.gloss) <= len(s.pose)

    @pytest.mark.parametrize(
        "kw, field",
        [
            (dict(vocab_size=1), "vocab_size"),
            (dict(motif_len=(3, 2)), "motif_len"),
            (dict(noise_std=-1), "noise_std"),
            (dict(confusable_pairs=[(0, 0)]), "confusable_pairs"),
            (dict(confusable_pairs=[(0, 40)]), "confusable_pairs"),
        ],
    )
    def test_invalid_spec_names_field(self, kw, field):
        with pytest.raises(ValueError, match=field):
            SyntheticSpec(**kw)

    def test_n_samples_positive(self):
        with pytest.raises(ValueError, match="n_samples"):
            generate_synthetic_corpus(SyntheticSpec(), 0)

    def test_spec_json_round_trip(self):
        spec = SyntheticSpec.with_confusable(2, seed=5)
        assert SyntheticSpec.from_json(spec.to_json()) == spec


class TestCorpus:
    def test_gloss_longer_than_pose_rejected(self):
        with pytest.raises(ValueError, match="gloss length 3 exceeds 2"):
            CorpusSample("x", ["a"], ["A", "B", "C"], np.zeros((2, POSE_DIM)))

    def test_dataset_adapter(self, small_corpus):
        ds = InMemoryDataset(small_corpus)
        assert len(ds) == 8 and ds[ds.ids()[0]] is small_corpus[0]
        with pytest.raises(ValueError, match="duplicate"):
            InMemoryDataset([small_corpus[0], small_corpus[0]])

    @pytest.mark.parametrize("binary", [False, True])
    def test_manifest_round_trip(self, tmp_path, small_corpus, binary):
        from signnet.data import write_manifest

        path = write_manifest(tmp_path / "m.tsv", small_corpus, binary=binary)
        back = read_manifest(path)
        assert [s.id for s in back] == [s.id for s in small_corpus]
        for a, b in zip(back, small_corpus):
            assert a.sentence == b.sentence and a.gloss == b.gloss
            np.testing.assert_array_equal(a.pose, b.pose)

    def test_manifest_errors(self, tmp_path):
        with pytest.raises(ManifestError, match="cannot read manifest"):
            read_manifest(tmp_path / "missing.tsv")
        bad = tmp_path / "bad.tsv"
        bad.write_text("a\tb\n")
        with pytest.raises(ManifestError, match=":1: expected 4"):
            read_manifest(bad)
        bad.write_text("a\tb\tB\tnope.pose\n")
        with pytest.raises(ManifestError, match="cannot read pose file"):
            read_manifest(bad)


class TestBatching:
    def test_partition_sizes(self):
        assert [len(b) for b in make_batches(range(10), 4, seed=0)] == [4, 4, 2]

    def test_singleton_tail_merged(self):
        batches = make_batches(range(9), 4, seed=0)
        assert [len(b) for b in batches] == [4, 5]
        assert sorted(i for b in batches for i in b) == list(range(9))

    def test_seeded(self):
        assert make_batches(range(10), 4, 1) == make_batches(range(10), 4, 1)
        assert make_batches(range(10), 4, 1) != make_batches(range(10), 4, 2)

    def test_batch_size_too_small(self):
        with pytest.raises(ValueError, match="batch_size"):
            make_batches(range(10), 1, 0)

    def test_pad_tokens(self):
        ids, mask = pad_tokens([[4, 5, 6], [7]], 0)
        np.testing.assert_array_equal(ids, [[4, 5, 6], [7, 0, 0]])
        np.testing.assert_array_equal(mask, [[False] * 3, [False, True, True]])

    def test_shift_frames(self, rng):
        x = rng.normal(size=(3, POSE_DIM))
        s = shift_frames(x)
        assert (s[0] == 0).all()
        np.testing.assert_array_equal(s[1:], x[:-1])

    def test_padding_never_contributes_to_loss(self, rng):
        pred = rng.normal(size=(3, POSE_DIM))
        target = rng.normal(size=(3, POSE_DIM))
        frames, mask = pad_frames([target, rng.normal(size=(5, POSE_DIM))])
        padded_pred = np.concatenate([pred, rng.normal(size=(2, POSE_DIM)) * 100], axis=0)
        base = mse_loss(Tensor(pred[None]), Tensor(target[None])).item()
        padded = mse_loss(Tensor(padded_pred[None]), Tensor(frames[:1]), ~mask[:1]).item()
        assert padded == pytest.approx(base, rel=1e-14)
