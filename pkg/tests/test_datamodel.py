"""Dump and key format round-trips plus invariant enforcement."""

import numpy as np
import pytest

from sensemim.datamodel import (
    ClusteringSolution,
    DumpFormatError,
    InstanceId,
    KeyFormatError,
    SenseKey,
    ValidationError,
    VectorPair,
    VectorPairSet,
    format_key,
    parse_key,
    read_vector_dump,
    solution_to_key,
    write_key,
    write_vector_dump,
)


def make_pairs(rng, n, dim, lemma="bank", pos="n", with_prime=True):
    pairs = []
    for i in range(n):
        x = rng.normal(size=dim)
        xp = rng.normal(size=dim) if with_prime else None
        pairs.append(VectorPair(InstanceId(lemma, pos, f"u{i}"), x, xp))
    return pairs


class TestInstanceId:
    def test_token_round_trip(self):
        rid = InstanceId("bank", "n", "d001.s003.t000")
        assert rid.token == "bank.n.d001.s003.t000"
        assert InstanceId.from_token(rid.token) == rid

    def test_rejects_bad_lemma(self):
        with pytest.raises(ValidationError):
            InstanceId("Bank", "n", "u1")
        with pytest.raises(ValidationError):
            InstanceId("two words", "n", "u1")
        with pytest.raises(ValidationError):
            InstanceId("dot.ted", "n", "u1")

    def test_rejects_bad_pos_and_uid(self):
        with pytest.raises(ValidationError):
            InstanceId("bank", "x", "u1")
        with pytest.raises(ValidationError):
            InstanceId("bank", "n", "")
        with pytest.raises(ValidationError):
            InstanceId("bank", "n", "u 1")


class TestVectorPairSet:
    def test_train_split_requires_prime(self):
        rng = np.random.default_rng(0)
        pairs = make_pairs(rng, 3, 4, with_prime=False)
        with pytest.raises(ValidationError, match="x_prime"):
            VectorPairSet("bank", "n", 11, 4, "train", pairs)

    def test_dimension_mismatch_names_record(self):
        rng = np.random.default_rng(0)
        pairs = make_pairs(rng, 2, 4)
        pairs.append(VectorPair(InstanceId("bank", "n", "odd"), rng.normal(size=5), rng.normal(size=5)))
        with pytest.raises(ValidationError, match="odd"):
            VectorPairSet("bank", "n", 11, 4, "train", pairs)

    def test_duplicate_uid_rejected(self):
        rng = np.random.default_rng(0)
        pairs = make_pairs(rng, 2, 4)
        pairs.append(VectorPair(InstanceId("bank", "n", "u0"), rng.normal(size=4), rng.normal(size=4)))
        with pytest.raises(ValidationError, match="duplicate"):
            VectorPairSet("bank", "n", 11, 4, "train", pairs)

    def test_stacking(self):
        rng = np.random.default_rng(1)
        pairs = make_pairs(rng, 5, 3)
        pset = VectorPairSet("bank", "n", 2, 3, "train", pairs)
        assert pset.xs().shape == (5, 3)
        assert pset.x_primes().shape == (5, 3)
        np.testing.assert_array_equal(pset.xs()[2], pairs[2].x)


class TestDumpRoundTrip:
    def test_text_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        pairs = make_pairs(rng, 8, 6)
        pairs[3] = VectorPair(pairs[3].id, pairs[3].x, None)  # one missing paraphrase
        pset = VectorPairSet("bank", "n", 11, 6, "test", pairs)
        path = tmp_path / "bank.n.dump"
        write_vector_dump(pset, path)
        back = read_vector_dump(path)
        assert (back.lemma, back.pos, back.layer, back.dim, back.split) == ("bank", "n", 11, 6, "test")
        assert len(back) == 8
        for orig, rt in zip(pset.pairs, back.pairs):
            assert rt.id == orig.id
            np.testing.assert_array_equal(rt.x, orig.x)
            if orig.x_prime is None:
                assert rt.x_prime is None
            else:
                np.testing.assert_array_equal(rt.x_prime, orig.x_prime)

    def test_binary_round_trip_f32(self, tmp_path):
        rng = np.random.default_rng(8)
        pairs = make_pairs(rng, 5, 4)
        pset = VectorPairSet("run", "v", 9, 4, "train", pairs)
        path = tmp_path / "run.v.dump"
        write_vector_dump(pset, path, binary=True)
        back = read_vector_dump(path)
        assert len(back) == 5
        for orig, rt in zip(pset.pairs, back.pairs):
            np.testing.assert_array_equal(rt.x, orig.x.astype("<f4").astype(np.float64))
            np.testing.assert_array_equal(rt.x_prime, orig.x_prime.astype("<f4").astype(np.float64))

    def test_count_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(2)
        pset = VectorPairSet("bank", "n", 1, 2, "test", make_pairs(rng, 3, 2))
        path = tmp_path / "d"
        write_vector_dump(pset, path)
        text = path.read_text().replace("count=3", "count=4")
        path.write_text(text)
        with pytest.raises(DumpFormatError, match="count"):
            read_vector_dump(path)

    def test_bad_coordinate_names_record(self, tmp_path):
        path = tmp_path / "d"
        path.write_text(
            "#WSI-DUMP v1 lemma=bank pos=n layer=1 dim=2 split=test count=2\n"
            "u0\t1.0 2.0\t-\n"
            "u1\t1.0 oops\t-\n"
        )
        with pytest.raises(DumpFormatError, match="record 2"):
            read_vector_dump(path)

    def test_wrong_dim_names_record(self, tmp_path):
        path = tmp_path / "d"
        path.write_text(
            "#WSI-DUMP v1 lemma=bank pos=n layer=1 dim=3 split=test count=1\n"
            "u0\t1.0 2.0\t-\n"
        )
        with pytest.raises(DumpFormatError, match="record 1"):
            read_vector_dump(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "d"
        path.write_text("#WSI-DUMP v2 lemma=bank pos=n layer=1 dim=3 split=test count=0\n")
        with pytest.raises(DumpFormatError, match="version"):
            read_vector_dump(path)
        path.write_text("#SOMETHING-ELSE v1\n")
        with pytest.raises(DumpFormatError, match="header"):
            read_vector_dump(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "d"
        path.write_text(
            "#WSI-DUMP v1 lemma=bank pos=n layer=1 dim=2 split=test count=1\n"
            "u0\t1.0 inf\t-\n"
        )
        with pytest.raises(DumpFormatError, match="finite"):
            read_vector_dump(path)


class TestKeyFormat:
    def test_crisp_example(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("bank.n bank.n.12 cluster3/1.0\n")
        key = parse_key(path, graded=False)
        assert key.is_crisp()
        rid = InstanceId("bank", "n", "12")
        assert key.by_id()[rid] == [("cluster3", 1.0)]

    def test_graded_example(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("add.v add.v.3 c1/0.8 c2/0.2\n")
        key = parse_key(path, graded=True)
        rid = InstanceId("add", "v", "3")
        assignments = dict(key.by_id()[rid])
        assert assignments == pytest.approx({"c1": 0.8, "c2": 0.2})

    def test_crisp_mode_rejects_multiple_senses(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("add.v add.v.3 c1/0.8 c2/0.2\n")
        with pytest.raises(KeyFormatError, match="crisp"):
            parse_key(path, graded=False)

    def test_renormalization_within_tolerance(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("add.v add.v.3 c1/0.4004 c2/0.6\n")
        key = parse_key(path, graded=True)
        weights = dict(key.by_id()[InstanceId("add", "v", "3")])
        assert sum(weights.values()) == pytest.approx(1.0, abs=1e-12)

    def test_renormalization_beyond_tolerance_rejected(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("add.v add.v.3 c1/0.5 c2/0.6\n")
        with pytest.raises(KeyFormatError, match="tolerance"):
            parse_key(path, graded=True)

    def test_missing_weight_rejected(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("add.v add.v.3 c1\n")
        with pytest.raises(KeyFormatError, match="sense/weight"):
            parse_key(path, graded=True)

    def test_group_instance_mismatch_rejected(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("bank.n add.v.3 c1/1.0\n")
        with pytest.raises(KeyFormatError, match="group"):
            parse_key(path, graded=True)

    def test_duplicate_instance_rejected(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("add.v add.v.3 c1/1.0\nadd.v add.v.3 c2/1.0\n")
        with pytest.raises(KeyFormatError, match="duplicate"):
            parse_key(path, graded=True)

    def test_zero_or_negative_weight_rejected(self, tmp_path):
        path = tmp_path / "k"
        path.write_text("add.v add.v.3 c1/0.0 c2/1.0\n")
        with pytest.raises(KeyFormatError, match="> 0"):
            parse_key(path, graded=True)
        path.write_text("add.v add.v.3 c1/-0.5 c2/1.5\n")
        with pytest.raises(KeyFormatError, match="> 0"):
            parse_key(path, graded=True)

    def test_write_parse_round_trip(self, tmp_path):
        records = [
            (InstanceId("bank", "n", "1"), [("bank.n.cluster0", 1.0)]),
            (InstanceId("bank", "n", "2"), [("bank.n.cluster0", 0.75), ("bank.n.cluster1", 0.25)]),
            (InstanceId("run", "v", "a.b"), [("run.v.cluster2", 1.0)]),
        ]
        key = SenseKey(records)
        path = tmp_path / "k"
        write_key(key, path)
        back = parse_key(path, graded=True)
        assert back.by_id() == key.by_id()

    def test_fuzz_single_field_mutations_rejected(self, tmp_path):
        # Any single-token corruption of a valid line must raise, not parse.
        good = "bank.n bank.n.12 cluster3/1.0"
        mutations = [
            "bankn bank.n.12 cluster3/1.0",
            "bank.n bank.n12 cluster3/1.0",
            "bank.n bank.n.12 cluster3",
            "bank.n bank.n.12 cluster3/one",
            "bank.n bank.n.12 /1.0",
            "bank.n bank.n.12",
            "bank.x bank.x.12 cluster3/1.0",
        ]
        path = tmp_path / "k"
        path.write_text(good + "\n")
        parse_key(path, graded=False)
        for bad in mutations:
            path.write_text(bad + "\n")
            with pytest.raises(KeyFormatError):
                parse_key(path, graded=False)


class TestClusteringSolution:
    def _ids(self, n):
        return [InstanceId("bank", "n", f"u{i}") for i in range(n)]

    def test_valid_solution(self):
        ids = self._ids(4)
        labels = {ids[0]: 0, ids[1]: 1, ids[2]: 0, ids[3]: 1}
        grades = {
            ids[0]: np.array([0.9, 0.1]),
            ids[1]: np.array([0.2, 0.8]),
            ids[2]: np.array([0.6, 0.4]),
            ids[3]: np.array([0.5 - 1e-6, 0.5 + 1e-6]),
        }
        ClusteringSolution("bank", "n", 2, labels, grades).validate()

    def test_empty_cluster_rejected(self):
        ids = self._ids(2)
        with pytest.raises(ValidationError, match="empty"):
            ClusteringSolution("bank", "n", 3, {ids[0]: 0, ids[1]: 2}).validate()

    def test_grade_argmax_must_match_label(self):
        ids = self._ids(2)
        labels = {ids[0]: 0, ids[1]: 1}
        grades = {ids[0]: np.array([0.3, 0.7]), ids[1]: np.array([0.2, 0.8])}
        with pytest.raises(ValidationError, match="argmax"):
            ClusteringSolution("bank", "n", 2, labels, grades).validate()

    def test_solution_to_key_crisp_and_graded(self):
        ids = self._ids(3)
        labels = {ids[0]: 0, ids[1]: 1, ids[2]: 0}
        grades = {
            ids[0]: np.array([1.0, 0.0]),
            ids[1]: np.array([0.3, 0.7]),
            ids[2]: np.array([0.8, 0.2]),
        }
        sol = ClusteringSolution("bank", "n", 2, labels, grades)
        crisp = solution_to_key(sol, graded=False)
        assert crisp.is_crisp()
        assert crisp.by_id()[ids[1]] == [("bank.n.cluster1", 1.0)]
        graded = solution_to_key(sol, graded=True)
        # exact-zero weights are dropped from graded output
        assert graded.by_id()[ids[0]] == [("bank.n.cluster0", 1.0)]
        assert dict(graded.by_id()[ids[1]]) == pytest.approx({"bank.n.cluster0": 0.3, "bank.n.cluster1": 0.7})
        text = format_key(graded)
        assert "bank.n bank.n.u1 bank.n.cluster0/0.3 bank.n.cluster1/0.7" in text
