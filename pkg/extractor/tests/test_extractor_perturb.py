import pytest

from sensemim.datamodel import DataError, InstanceId

from senseextract.models import MASK
from senseextract.perturb import SentenceInstance, perturb

SENTENCE = "the old bank by the river flooded last spring again".split()


def make_instance(tokens=None, target=2, uid="t1"):
    return SentenceInstance(
        id=InstanceId("bank", "n", uid),
        tokens=tuple(tokens or SENTENCE),
        target_index=target,
    )


class RecordingParaphraser:
    """Echoes its input and keeps every masked sequence it was given."""

    def __init__(self):
        self.calls = []

    def fill(self, tokens):
        self.calls.append(list(tokens))
        return list(tokens)


class RewritingParaphraser:
    """Replaces every token, target included."""

    def fill(self, tokens):
        return ["zzz"] * len(tokens)


class PrependingParaphraser:
    """Shifts the sentence right by one token."""

    def fill(self, tokens):
        return ["suddenly"] + [t for t in tokens if t != MASK]


class TestInstanceValidation:
    def test_target_index_out_of_range(self):
        with pytest.raises(DataError):
            make_instance(target=99)

    def test_target_must_lemmatize(self):
        with pytest.raises(DataError):
            make_instance(target=1)

    def test_empty_sentence(self):
        with pytest.raises(DataError):
            SentenceInstance(id=InstanceId("bank", "n", "t1"), tokens=(), target_index=0)

    def test_inflected_target_accepted(self):
        inst = make_instance(tokens=["two", "banks", "merged"], target=1)
        assert inst.tokens[1] == "banks"


class TestPerturb:
    def test_zero_ratio_is_identity_without_model_call(self):
        recorder = RecordingParaphraser()
        inst = make_instance()
        out = perturb(inst, recorder, mask_ratio=0.0, seed=5)
        assert out is inst
        assert recorder.calls == []

    def test_target_never_masked(self):
        # High ratio masks almost everything else; the target token must
        # reach the model unmasked in every trial.
        inst = make_instance()
        for seed in range(1000):
            recorder = RecordingParaphraser()
            perturb(inst, recorder, mask_ratio=0.9, seed=seed)
            (masked,) = recorder.calls
            assert masked[inst.target_index] == inst.tokens[inst.target_index]
            assert masked[inst.target_index] != MASK

    def test_mask_count_and_cap(self):
        inst = make_instance()
        recorder = RecordingParaphraser()
        perturb(inst, recorder, mask_ratio=0.4, seed=0)
        (masked,) = recorder.calls
        assert masked.count(MASK) == 4  # ceil(0.4 * 10)

        short = make_instance(tokens=["the", "bank", "closed"], target=1)
        recorder = RecordingParaphraser()
        perturb(short, recorder, mask_ratio=1.0, seed=0)
        (masked,) = recorder.calls
        assert masked.count(MASK) == 2  # capped at len - 1

    def test_deterministic_in_seed(self):
        inst = make_instance()
        a = RecordingParaphraser()
        b = RecordingParaphraser()
        perturb(inst, a, mask_ratio=0.5, seed=42)
        perturb(inst, b, mask_ratio=0.5, seed=42)
        assert a.calls == b.calls

    def test_seed_varies_mask_positions(self):
        inst = make_instance()
        patterns = set()
        for seed in range(10):
            recorder = RecordingParaphraser()
            perturb(inst, recorder, mask_ratio=0.5, seed=seed)
            patterns.add(tuple(i for i, t in enumerate(recorder.calls[0]) if t == MASK))
        assert len(patterns) > 1

    def test_target_relocated_after_rewrite(self):
        inst = make_instance()
        out = perturb(inst, PrependingParaphraser(), mask_ratio=0.3, seed=1)
        assert out is not None
        assert out.tokens[0] == "suddenly"
        assert out.tokens[out.target_index] == "bank"
        assert out.target_index == out.tokens.index("bank")

    def test_vanished_target_returns_none(self):
        out = perturb(make_instance(), RewritingParaphraser(), mask_ratio=0.3, seed=1)
        assert out is None

    def test_bad_ratio_rejected(self):
        with pytest.raises(DataError):
            perturb(make_instance(), RecordingParaphraser(), mask_ratio=1.5)

    def test_real_paraphraser_keeps_id(self, paraphraser):
        inst = make_instance()
        out = perturb(inst, paraphraser, mask_ratio=0.4, seed=9)
        assert out is not None
        assert out.id == inst.id
