import warnings

import numpy as np
import pytest

from sensemim.datamodel import (
    DataError,
    InstanceId,
    SenseKey,
    parse_key,
    read_vector_dump,
    write_key,
)
from sensemim.cli import main as sensemim_main

from senseextract.cli import main as extract_main
from senseextract.extract import (
    build_word_dumps,
    collect_instances,
    extract,
    subsample,
)
from senseextract.models import ModelError
from senseextract.perturb import SentenceInstance


class EchoParaphraser:
    def fill(self, tokens):
        return list(tokens)


class RewritingParaphraser:
    def fill(self, tokens):
        return ["zzz"] * len(tokens)


class FailingEncoder:
    """Delegates, but fails on sentences carrying a marker token; the
    marker sits in the original tokens, so masking cannot hide it."""

    def __init__(self, inner):
        self.inner = inner
        self.dim = inner.dim
        self.num_layers = inner.num_layers

    def encode(self, tokens, layer):
        if "POISON" in tokens:
            raise ModelError("backend exploded")
        return self.inner.encode(tokens, layer)


class EmptySpanEncoder:
    """Tokenizer that drops every word."""

    dim = 4
    num_layers = 2

    def encode(self, tokens, layer):
        return np.zeros((0, 4)), [(0, 0) for _ in tokens]


class TestCollect:
    def test_tab_field_becomes_uid(self):
        insts = collect_instances(["x7\tthe bank closed"], "bank", "n", "test")
        assert insts[0].id == InstanceId("bank", "n", "x7")

    def test_line_number_uid_without_tab(self):
        lines = ["the bank closed", "", "banks merged today"]
        insts = collect_instances(lines, "bank", "n", "test")
        assert [i.id.uid for i in insts] == ["test1", "test3"]

    def test_first_match_is_target(self):
        insts = collect_instances(["bank to bank transfer"], "bank", "n", "test")
        assert insts[0].target_index == 0

    def test_unlocatable_target_dropped_with_warning(self):
        with pytest.warns(UserWarning, match="line dropped"):
            insts = collect_instances(
                ["nothing relevant here", "the bank closed"], "bank", "n", "test"
            )
        assert len(insts) == 1

    def test_inflected_target_located(self):
        insts = collect_instances(["several banks failed"], "bank", "n", "test")
        assert insts[0].target_index == 1


class TestSubsample:
    def _instances(self, n):
        return [
            SentenceInstance(InstanceId("bank", "n", f"u{i}"), ("bank", "open"), 0)
            for i in range(n)
        ]

    def test_under_cap_untouched(self):
        insts = self._instances(5)
        assert subsample(insts, 10, seed=0) == insts

    def test_over_cap_keeps_order_and_size(self):
        insts = self._instances(50)
        picked = subsample(insts, 20, seed=3)
        assert len(picked) == 20
        positions = [insts.index(p) for p in picked]
        assert positions == sorted(positions)

    def test_deterministic(self):
        insts = self._instances(50)
        assert subsample(insts, 20, seed=3) == subsample(insts, 20, seed=3)


class TestExtract:
    def test_single_subword_target_is_that_hidden_state(self, encoder):
        insts = collect_instances(["the bank closed"], "bank", "n", "test")
        pset = extract(insts, encoder, EchoParaphraser(), layer=0, split="test")
        hidden, spans = encoder.encode(list(insts[0].tokens), 0)
        start, end = spans[insts[0].target_index]
        assert end - start == 1  # 4 letters, one piece
        assert np.allclose(pset.pairs[0].x, hidden[start])

    def test_vector_is_mean_of_target_span(self, encoder):
        insts = collect_instances(["the riverbanks eroded quickly"], "riverbank", "n", "test")
        pset = extract(insts, encoder, EchoParaphraser(), layer=1, split="test")
        hidden, spans = encoder.encode(list(insts[0].tokens), 1)
        start, end = spans[insts[0].target_index]
        assert end - start == 3  # 10 letters, 4-char pieces
        assert np.allclose(pset.pairs[0].x, hidden[start:end].mean(axis=0))

    def test_identical_sentences_identical_vectors(self, encoder, paraphraser):
        lines = ["a1\tthe bank closed early", "a2\tthe bank closed early"]
        insts = collect_instances(lines, "bank", "n", "test")
        pset = extract(insts, encoder, paraphraser, layer=0, split="test", seed=7)
        assert np.array_equal(pset.pairs[0].x, pset.pairs[1].x)

    def test_zero_mask_ratio_pairs_identical_vectors(self, encoder, fixture_lines):
        insts = collect_instances(fixture_lines, "bank", "n", "train")
        pset = extract(
            insts, encoder, EchoParaphraser(), layer=0, split="train", mask_ratio=0.0
        )
        assert len(pset) == len(insts)
        for pair in pset.pairs:
            assert np.array_equal(pair.x, pair.x_prime)

    def test_layers_differ(self, encoder, paraphraser, fixture_lines):
        insts = collect_instances(fixture_lines, "bank", "n", "test")
        a = extract(insts, encoder, paraphraser, layer=0, split="test", seed=1)
        b = extract(insts, encoder, paraphraser, layer=2, split="test", seed=1)
        assert not np.allclose(a.xs(), b.xs())

    def test_model_failure_skips_instance(self, encoder, paraphraser):
        lines = ["k1\tthe bank closed", "k2\tthe bank held POISON today"]
        insts = collect_instances(lines, "bank", "n", "test")
        with pytest.warns(UserWarning, match="model failure"):
            pset = extract(insts, FailingEncoder(encoder), paraphraser, layer=0, split="test")
        assert [p.id.uid for p in pset.pairs] == ["k1"]

    def test_vanished_target_drops_train_pair(self, encoder, fixture_lines):
        insts = collect_instances(fixture_lines, "bank", "n", "train")
        with pytest.warns(UserWarning, match="train pair dropped"):
            pset = extract(insts, encoder, RewritingParaphraser(), layer=0, split="train")
        assert len(pset) == 0

    def test_vanished_target_kept_on_test_without_twin(self, encoder, fixture_lines):
        insts = collect_instances(fixture_lines, "bank", "n", "test")
        pset = extract(insts, encoder, RewritingParaphraser(), layer=0, split="test")
        assert len(pset) == len(insts)
        assert all(p.x_prime is None for p in pset.pairs)

    def test_empty_target_span_drops_instance(self, paraphraser):
        insts = collect_instances(["e1\tthe bank closed"], "bank", "n", "test")
        with pytest.warns(UserWarning, match="no subwords"):
            pset = extract(insts, EmptySpanEncoder(), paraphraser, layer=0, split="test")
        assert len(pset) == 0

    def test_no_instances_rejected(self, encoder, paraphraser):
        with pytest.raises(DataError):
            extract([], encoder, paraphraser, layer=0, split="test")


class TestWordDumps:
    def test_dumps_validate_and_ids_join_gold(
        self, tmp_path, encoder, paraphraser, fixture_lines, fixture_sentences
    ):
        info = build_word_dumps(
            fixture_lines,
            fixture_lines,
            "bank",
            "n",
            encoder,
            paraphraser,
            layers=[0, 1],
            out_dir=str(tmp_path / "dumps"),
            seed=11,
        )
        assert len(info["paths"]) == 4

        gold = SenseKey(
            records=[
                (InstanceId("bank", "n", uid), [(sense, 1.0)])
                for uid, sense, _ in fixture_sentences
            ]
        )
        gold_path = tmp_path / "gold.key"
        write_key(gold, gold_path)
        gold_ids = set(parse_key(gold_path, graded=False).by_id())

        for path in info["paths"]:
            pset = read_vector_dump(path)  # validates on construction
            if pset.split == "test":
                assert set(pset.ids()) == gold_ids

    def test_instance_ids_consistent_across_layers(self, tmp_path, encoder, paraphraser, fixture_lines):
        info = build_word_dumps(
            fixture_lines,
            fixture_lines,
            "bank",
            "n",
            encoder,
            paraphraser,
            layers=[0, 1, 2],
            out_dir=str(tmp_path),
            seed=4,
        )
        train_ids = [
            read_vector_dump(p).ids() for p in info["paths"] if p.endswith("train.dump")
        ]
        assert train_ids[0] == train_ids[1] == train_ids[2]

    def test_max_train_cap_applied(self, tmp_path, encoder, paraphraser, fixture_lines):
        info = build_word_dumps(
            fixture_lines,
            fixture_lines,
            "bank",
            "n",
            encoder,
            paraphraser,
            layers=[0],
            out_dir=str(tmp_path),
            seed=2,
            max_train=8,
        )
        assert info["train_used"] == 8
        assert info["train_collected"] == 20


def write_corpora(tmp_path, fixture_lines):
    train = tmp_path / "train.txt"
    test = tmp_path / "test.txt"
    train.write_text("\n".join(fixture_lines) + "\n", encoding="utf-8")
    test.write_text("\n".join(fixture_lines) + "\n", encoding="utf-8")
    return str(train), str(test)


class TestCli:
    def test_end_to_end_dumps_feed_clustering(
        self, tmp_path, fixture_lines, fixture_sentences, capsys
    ):
        train, test = write_corpora(tmp_path, fixture_lines)
        out = tmp_path / "dumps"
        rc = extract_main(
            [
                "--train-corpus", train,
                "--test-corpus", test,
                "--words", "bank.n",
                "--encoder", "fake:16",
                "--paraphraser", "fake",
                "--layers", "0", "1",
                "--out", str(out),
                "--seed", "3",
            ]
        )
        assert rc == 0
        printed = capsys.readouterr().out
        assert "bank.n: train 20/20 kept" in printed
        assert "perturbation:" in printed

        key_path = tmp_path / "bank.key"
        rc = sensemim_main(
            [
                "cluster",
                "--dump", str(out / "bank.n.L0.test.dump"),
                "--out", str(key_path),
                "--mode", "fixed",
                "--k", "2",
            ]
        )
        assert rc == 0
        key = parse_key(key_path, graded=False)
        assert len(key) == 20
        assert {rid.uid for rid in key.ids()} == {uid for uid, _, _ in fixture_sentences}

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_multiple_words(self, tmp_path, fixture_lines, capsys):
        extra = fixture_lines + [
            "w01\tthe cool water helped",
            "w02\ta cooler evening followed",
        ]
        train, test = write_corpora(tmp_path, extra)
        rc = extract_main(
            [
                "--train-corpus", train,
                "--test-corpus", test,
                "--words", "bank.n", "cool.j",
                "--layers", "0",
                "--out", str(tmp_path / "d"),
            ]
        )
        assert rc == 0
        assert (tmp_path / "d" / "cool.j.L0.train.dump").exists()
        assert "cool.j: train 2/2 kept" in capsys.readouterr().out

    def test_unknown_backend_exits_2(self, tmp_path, fixture_lines, capsys):
        train, test = write_corpora(tmp_path, fixture_lines)
        rc = extract_main(
            [
                "--train-corpus", train,
                "--test-corpus", test,
                "--words", "bank.n",
                "--encoder", "gigantic-transformer",
                "--layers", "0",
                "--out", str(tmp_path / "d"),
            ]
        )
        assert rc == 2
        assert "no encoder backend" in capsys.readouterr().err

    def test_missing_corpus_exits_2(self, tmp_path, capsys):
        rc = extract_main(
            [
                "--train-corpus", str(tmp_path / "absent.txt"),
                "--test-corpus", str(tmp_path / "absent.txt"),
                "--words", "bank.n",
                "--layers", "0",
                "--out", str(tmp_path / "d"),
            ]
        )
        assert rc == 2

    def test_layer_out_of_range_exits_2(self, tmp_path, fixture_lines, capsys):
        train, test = write_corpora(tmp_path, fixture_lines)
        rc = extract_main(
            [
                "--train-corpus", train,
                "--test-corpus", test,
                "--words", "bank.n",
                "--encoder", "fake:8:2",
                "--layers", "5",
                "--out", str(tmp_path / "d"),
            ]
        )
        assert rc == 2
        assert "outside encoder depth" in capsys.readouterr().err

    def test_bad_word_format_exits_2(self, tmp_path, fixture_lines, capsys):
        train, test = write_corpora(tmp_path, fixture_lines)
        rc = extract_main(
            [
                "--train-corpus", train,
                "--test-corpus", test,
                "--words", "bank",
                "--layers", "0",
                "--out", str(tmp_path / "d"),
            ]
        )
        assert rc == 2

    def test_word_without_instances_exits_1(self, tmp_path, fixture_lines, capsys):
        train, test = write_corpora(tmp_path, fixture_lines)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rc = extract_main(
                [
                    "--train-corpus", train,
                    "--test-corpus", test,
                    "--words", "zzgrommet.n",
                    "--layers", "0",
                    "--out", str(tmp_path / "d"),
                ]
            )
        assert rc == 1
        assert "failed" in capsys.readouterr().err
