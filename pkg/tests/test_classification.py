import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import mannwhitneyu

from acspeech.area import ABS, AreaConfig, ConfigError
from acspeech.classification import (ClassBank, IntegrityError, LabelError, Segment, build_bank,
                                     classify, confusion_matrix, encoder_hash, evaluate,
                                     load_bank, pick_label, predict, save_bank, train_bank)

AREA = AreaConfig(n=300, k=30, k_in=10, k_in_rec=30, beta=0.05, rule=ABS)
WIDTH = 40


def disjoint_segments(rng, n_per_class=6, length=5):
    """Class "a" fires only in the lower half of the input, "b" only in the upper."""
    segs = []
    for label, lo in (("a", 0), ("b", WIDTH // 2)):
        for _ in range(n_per_class):
            x = np.zeros((length, WIDTH), dtype=np.uint8)
            x[:, lo: lo + WIDTH // 2] = rng.random((length, WIDTH // 2)) < 0.4
            segs.append(Segment(x, label))
    return segs


@pytest.fixture(scope="module")
def trained():
    rng = np.random.default_rng(0)
    segs = disjoint_segments(rng)
    bank = build_bank(["a", "b"], AREA, WIDTH, seed=1)
    train_bank(bank, segs, epochs=3)
    return bank, segs


def test_tie_goes_to_smallest_label():
    assert pick_label(["a", "b", "c"], [0.2, 0.9, 0.9]) == "b"
    assert pick_label(["z", "y"], [1.0, 1.0]) == "y"


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=8), st.floats(0.01, 100))
def test_positive_scaling_keeps_the_winner(scores, factor):
    labels = [f"c{i}" for i in range(len(scores))]
    scaled = [s * factor for s in scores]
    best = max(scores)
    if any(s != best and s * factor == best * factor for s in scores):
        return  # rounding merged two scores
    assert pick_label(labels, scores) == pick_label(labels, scaled)


def test_bank_validation():
    area = build_bank(["a", "b"], AREA, WIDTH).areas
    with pytest.raises(ConfigError):
        ClassBank(["a"], area[:1])
    with pytest.raises(ConfigError):
        ClassBank(["a", "a"], area)
    with pytest.raises(ConfigError):
        ClassBank(["a", "b", "c"], area)


def test_unknown_label_is_rejected():
    bank = build_bank(["a", "b"], AREA, WIDTH)
    with pytest.raises(LabelError):
        train_bank(bank, [Segment(np.zeros((2, WIDTH)), "zzz")], epochs=1)
    with pytest.raises(LabelError):
        evaluate(bank, [Segment(np.zeros((2, WIDTH)), "zzz")])


def test_empty_segment_rejected():
    with pytest.raises(ValueError):
        Segment(np.zeros((0, WIDTH)), "a")


def test_zero_epochs_leave_initial_weights():
    bank = build_bank(["a", "b"], AREA, WIDTH, seed=4)
    before = bank.checksums()
    train_bank(bank, disjoint_segments(np.random.default_rng(0)), epochs=0)
    assert bank.checksums() == before


def test_training_needs_plasticity():
    bank = build_bank(["a", "b"], AREA.replace(beta=0.0), WIDTH)
    with pytest.raises(ConfigError):
        train_bank(bank, disjoint_segments(np.random.default_rng(0)), epochs=1)


def test_winners_concentrate_weight_on_active_inputs():
    bank = build_bank(["a", "b"], AREA.replace(k_in_rec=0), WIDTH, seed=2)
    x = np.zeros(WIDTH, dtype=np.uint8)
    x[::3] = 1
    train_bank(bank, [Segment(np.tile(x, (4, 1)), "a")], epochs=20)
    area = bank.areas[0]
    winners = area.step(x, plastic=False)
    active = x[area.ff_src[winners]] == 1
    mass = (area.ff_w[winners] * active).sum(axis=1)
    uniform_share = active.sum(axis=1) / area.config.k_in
    assert np.all(mass > uniform_share)


def test_training_segments_classify_as_their_own_class(trained):
    bank, segs = trained
    assert all(classify(bank, s).label == s.label for s in segs)


def test_area_order_does_not_change_predictions(trained):
    bank, segs = trained
    flipped = ClassBank(bank.labels[::-1], bank.areas[::-1])
    for s in segs:
        assert classify(bank, s).label == classify(flipped, s).label


def test_threads_give_identical_training():
    segs = disjoint_segments(np.random.default_rng(3))
    a = build_bank(["a", "b"], AREA, WIDTH, seed=5)
    b = build_bank(["a", "b"], AREA, WIDTH, seed=5)
    train_bank(a, segs, 2, threads=1)
    train_bank(b, segs, 2, threads=2)
    assert a.checksums() == b.checksums()
    assert [p.label for p in predict(a, segs)] == [p.label for p in predict(b, segs, threads=2)]


def test_evaluation_is_frozen(trained):
    bank, segs = trained
    before = bank.checksums()
    evaluate(bank, segs)
    confusion_matrix(bank, segs)
    assert bank.checksums() == before


def test_perfect_confusion_is_diagonal(trained):
    bank, segs = trained
    counts, norm = confusion_matrix(bank, segs)
    assert np.array_equal(counts, np.diag([6, 6]))
    np.testing.assert_allclose(norm, np.eye(2))


def test_untrained_classes_are_exchangeable():
    # no class position is preferred before training: a class's resonance
    # over many bank draws is distributed like any other class's
    rng = np.random.default_rng(0)
    segs = [Segment((rng.random((4, WIDTH)) < 0.3).astype(np.uint8)) for _ in range(10)]
    per_class = [[], [], []]
    for seed in range(30):
        bank = build_bank(["a", "b", "c"], AREA.replace(n=150, k=15, k_in_rec=15), WIDTH, seed)
        for s in segs:
            scores = classify(bank, s).scores
            for c in range(3):
                per_class[c].append(scores[c])
    for c in (1, 2):
        assert mannwhitneyu(per_class[0], per_class[c]).pvalue > 0.01


# -- persistence ---------------------------------------------------------------

ENCODER = {"population": {"n_pop": 3}}


def test_save_load_roundtrip(trained, tmp_path):
    bank, segs = trained
    save_bank(bank, tmp_path / "m", ENCODER)
    back, manifest = load_bank(tmp_path / "m", encoder_hash(ENCODER))
    assert back.labels == bank.labels and back.checksums() == bank.checksums()
    assert manifest["encoder"] == ENCODER
    assert [classify(back, s).label for s in segs] == [classify(bank, s).label for s in segs]


def test_saving_twice_is_byte_identical(trained, tmp_path):
    bank, _ = trained
    for d in ("m1", "m2"):
        save_bank(bank, tmp_path / d, ENCODER)
    for name in sorted(p.name for p in (tmp_path / "m1").iterdir()):
        assert (tmp_path / "m1" / name).read_bytes() == (tmp_path / "m2" / name).read_bytes()


def test_missing_class_file(trained, tmp_path):
    save_bank(trained[0], tmp_path / "m", ENCODER)
    (tmp_path / "m" / "class_001.area").unlink()
    with pytest.raises(IntegrityError):
        load_bank(tmp_path / "m")


def test_tampered_class_file(trained, tmp_path):
    save_bank(trained[0], tmp_path / "m", ENCODER)
    path = tmp_path / "m" / "class_000.area"
    data = bytearray(path.read_bytes())
    data[-30] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(IntegrityError):
        load_bank(tmp_path / "m")


def test_encoder_mismatch(trained, tmp_path):
    save_bank(trained[0], tmp_path / "m", ENCODER)
    with pytest.raises(IntegrityError):
        load_bank(tmp_path / "m", encoder_hash({"population": {"n_pop": 4}}))


def test_missing_manifest(tmp_path):
    with pytest.raises(IntegrityError):
        load_bank(tmp_path)
