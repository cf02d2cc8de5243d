"""
Tests for the synthetic corpus, batching and data splits.
"""

import numpy as np
import pytest

from src.data import (
    gen_synthetic_corpus,
    make_batches,
    pad_batch,
    split_speakers,
    split_utterances,
)
from src.errors import ConfigError, ContractError
from src.models.schema import FeatureSequence, Gender, SynthConfig


@pytest.fixture
def small_config():
    """A corpus small enough to generate in milliseconds."""
    return SynthConfig(
        n_speakers=4, n_phones=5, utterances_per_speaker=3, frames_per_utterance=40, feature_dim=6, seed=11
    )


def make_corpus(lengths, dim=3):
    rng = np.random.default_rng(0)
    return [
        FeatureSequence(
            utterance_id=f"u{i:02d}",
            speaker_id=f"s{i % 3}",
            frames=rng.standard_normal((length, dim)),
            phone_labels=np.zeros(length, dtype=np.int64),
            gender=Gender.FEMALE if i % 2 else Gender.MALE,
        )
        for i, length in enumerate(lengths)
    ]


def test_synthetic_corpus_structure(small_config):
    """Test counts, shapes, label agreement, ids and alternating genders."""
    corpus = gen_synthetic_corpus(small_config)
    assert len(corpus) == 12
    assert corpus.speakers() == ["spk000", "spk001", "spk002", "spk003"]
    assert corpus.genders["spk000"] == Gender.FEMALE
    assert corpus.genders["spk001"] == Gender.MALE
    for sequence in corpus.utterances:
        assert sequence.frames.shape == (40, 6)
        assert sequence.phone_labels.shape == (40,)
        assert sequence.phone_labels.min() >= 0 and sequence.phone_labels.max() < 5
    assert corpus.utterances[0].utterance_id == "spk000_utt000"


def test_synthetic_corpus_is_deterministic(small_config):
    """Test the same seed regenerates identical frames and labels."""
    first = gen_synthetic_corpus(small_config)
    second = gen_synthetic_corpus(small_config)
    for a, b in zip(first.utterances, second.utterances):
        assert np.array_equal(a.frames, b.frames)
        assert np.array_equal(a.phone_labels, b.phone_labels)


def test_noiseless_unsmoothed_frames_equal_template_plus_offset(small_config):
    """Test noise_sigma = 0 and alpha = 0 give exactly template + offset."""
    cfg = small_config.model_copy(update={"noise_sigma": 0.0, "alpha": 0.0})
    corpus = gen_synthetic_corpus(cfg)
    for sequence in corpus.utterances:
        expected = corpus.templates[sequence.phone_labels] + corpus.offsets[sequence.speaker_id]
        assert np.allclose(sequence.frames, expected, atol=1e-5)
    assert corpus.oracle_accuracy == 1.0


def test_oracle_accuracy_on_defaults():
    """Test the nearest-template oracle beats 80% on the default corpus."""
    corpus = gen_synthetic_corpus(SynthConfig())
    assert corpus.oracle_accuracy > 0.8


def test_marginal_statistics_are_stable_across_seeds():
    """Test no seed produces a degenerate corpus."""
    for seed in range(3):
        corpus = gen_synthetic_corpus(SynthConfig(n_speakers=6, utterances_per_speaker=4, seed=seed))
        frames = np.concatenate([s.frames for s in corpus.utterances])
        assert abs(frames.mean()) < 0.2
        assert 0.5 < frames.std() < 3.0


def test_synth_config_validation():
    """Test alpha must lie in [0, 1) and counts must be positive."""
    with pytest.raises(ValueError):
        SynthConfig(alpha=1.0)
    with pytest.raises(ValueError):
        SynthConfig(n_speakers=0)
    with pytest.raises(ValueError):
        SynthConfig(unknown_key=3)


def test_padded_batches_cover_every_utterance_once():
    """Test 33 utterances in batches of 32 give 32 + 1 with zero padding."""
    corpus = make_corpus([5 + (i % 7) for i in range(33)])
    batches = list(make_batches(corpus, 32, seed=1))
    assert sorted(b.size for b in batches) == [1, 32]

    ids = [u for b in batches for u in b.utterance_ids]
    assert sorted(ids) == sorted(s.utterance_id for s in corpus)
    for batch in batches:
        assert np.all(batch.features[~batch.mask()] == 0.0)
        assert np.all(batch.labels[~batch.mask()] == -1)


def test_min_batch_folds_a_short_tail():
    """Test a trailing singleton joins the previous batch when min_batch=2."""
    corpus = make_corpus([5 + (i % 7) for i in range(33)])
    batches = list(make_batches(corpus, 32, seed=1, min_batch=2))
    assert [b.size for b in batches] == [33]
    assert sorted(batches[0].utterance_ids) == sorted(s.utterance_id for s in corpus)

    chunked = list(make_batches(make_corpus([30] * 5), 2, mode="chunked", chunk_frames=10, min_batch=2))
    assert [b.size for b in chunked] == [2, 3]
    # a single utterance has nothing to fold into
    assert [b.size for b in make_batches(make_corpus([5]), 4, min_batch=2)] == [1]


def test_batch_order_is_a_function_of_seed_and_epoch():
    """Test identical composition for the same (seed, epoch)."""
    corpus = make_corpus([5 + (i % 4) for i in range(20)])
    first = [b.utterance_ids for b in make_batches(corpus, 6, seed=3, epoch=2)]
    second = [b.utterance_ids for b in make_batches(corpus, 6, seed=3, epoch=2)]
    assert first == second


def test_chunked_batches_have_fixed_length():
    """Test chunked mode yields exactly B x len x D windows."""
    corpus = make_corpus([150, 200, 128, 300, 129])
    batches = list(make_batches(corpus, 2, mode="chunked", chunk_frames=128, seed=0))
    assert [b.features.shape for b in batches] == [(2, 128, 3), (2, 128, 3), (1, 128, 3)]
    assert all(np.array_equal(b.lengths, [128] * b.size) for b in batches)


def test_chunking_rejects_short_utterances():
    """Test an utterance shorter than the chunk is rejected with its id."""
    corpus = make_corpus([150, 20])
    with pytest.raises(ContractError, match="u01"):
        list(make_batches(corpus, 2, mode="chunked", chunk_frames=128))


def test_batch_size_must_be_positive():
    """Test batch_size < 1 is a configuration error."""
    with pytest.raises(ConfigError):
        list(make_batches(make_corpus([5]), 0))


def test_pad_batch_lengths():
    """Test pad_batch records true lengths and pads to the longest."""
    batch = pad_batch(make_corpus([3, 5]))
    assert batch.features.shape == (2, 5, 3)
    assert batch.lengths.tolist() == [3, 5]


def test_split_utterances_partitions_corpus():
    """Test train/dev/test are disjoint and complete."""
    corpus = make_corpus([4] * 20)
    train, dev, test = split_utterances(corpus, 0.1, 0.2, seed=0)
    assert (len(train), len(dev), len(test)) == (14, 2, 4)
    ids = [s.utterance_id for s in train + dev + test]
    assert sorted(ids) == sorted(s.utterance_id for s in corpus)


def test_split_speakers_is_speaker_disjoint(small_config):
    """Test the two halves share no speaker and keep both genders."""
    corpus = gen_synthetic_corpus(small_config).utterances
    first, second = split_speakers(corpus, 0.5, seed=0)
    first_speakers = {s.speaker_id for s in first}
    second_speakers = {s.speaker_id for s in second}
    assert first_speakers and second_speakers
    assert not first_speakers & second_speakers
    assert {s.gender for s in first} == {Gender.FEMALE, Gender.MALE}
