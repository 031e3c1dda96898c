import struct

import numpy as np
import pytest
from helpers import corpus_of, painting

from mmart.errors import DataError
from mmart.feature_store import (
    FeatureFile,
    export_tsv,
    missing_ids,
    read_features,
    synthesize_features,
    write_features,
)


def small_corpus(n=6, labels=("a", "b")):
    return corpus_of(
        *(painting(f"p{i}", author=labels[i % len(labels)]) for i in range(n))
    )


def test_exact_byte_layout(tmp_path):
    file = FeatureFile(dim=2, records={"p1": np.array([0.5, -1.0])})
    path = tmp_path / "f.mmaf"
    write_features(file, path)
    expected = (
        b"MMAF"
        + struct.pack("<III", 1, 1, 2)
        + struct.pack("<I", 2)
        + b"p1"
        + struct.pack("<ff", 0.5, -1.0)
    )
    assert path.read_bytes() == expected


def test_empty_file_is_16_byte_header(tmp_path):
    path = tmp_path / "f.mmaf"
    write_features(FeatureFile(dim=7), path)
    assert path.stat().st_size == 16
    loaded = read_features(path)
    assert loaded.dim == 7 and loaded.records == {}


def test_round_trip_bytes_and_values(tmp_path):
    rng = np.random.default_rng(0)
    file = FeatureFile(
        dim=1000,
        records={
            "alpha": rng.normal(size=1000).astype(np.float32).astype(np.float64),
            "béta": rng.normal(size=1000).astype(np.float32).astype(np.float64),
        },
    )
    path = tmp_path / "f.mmaf"
    write_features(file, path)
    loaded = read_features(path)
    assert loaded.dim == 1000
    assert list(loaded.records) == ["alpha", "béta"]
    for pid in file.records:
        np.testing.assert_array_equal(loaded.records[pid], file.records[pid])
    write_features(loaded, tmp_path / "g.mmaf")
    assert (tmp_path / "g.mmaf").read_bytes() == path.read_bytes()


def test_truncated_record(tmp_path):
    path = tmp_path / "f.mmaf"
    write_features(FeatureFile(dim=4, records={"p": np.ones(4)}), path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(DataError, match="truncated record"):
        read_features(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "f.mmaf"
    path.write_bytes(b"NOPE" + b"\x00" * 12)
    with pytest.raises(DataError, match="bad magic"):
        read_features(path)


def test_version_mismatch(tmp_path):
    path = tmp_path / "f.mmaf"
    path.write_bytes(b"MMAF" + struct.pack("<III", 9, 0, 2))
    with pytest.raises(DataError, match="version"):
        read_features(path)


def test_non_finite_rejected_on_read(tmp_path):
    path = tmp_path / "f.mmaf"
    body = (
        b"MMAF"
        + struct.pack("<III", 1, 1, 1)
        + struct.pack("<I", 1)
        + b"p"
        + struct.pack("<f", float("nan"))
    )
    path.write_bytes(body)
    with pytest.raises(DataError, match="non-finite"):
        read_features(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "f.mmaf"
    write_features(FeatureFile(dim=1), path)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(DataError, match="trailing"):
        read_features(path)


class TestSynthesize:
    def test_zero_noise_gives_exact_basis_vectors(self):
        corpus = small_corpus()
        file = synthesize_features(corpus, dim=3, attribute="author", noise_sigma=0.0, seed=1)
        for p in corpus.paintings:
            expected = np.zeros(3)
            expected[0 if p.author == "a" else 1] = 1.0
            np.testing.assert_array_equal(file.records[p.id], expected)

    def test_deterministic_in_seed(self, tmp_path):
        corpus = small_corpus()
        for run in range(2):
            write_features(
                synthesize_features(corpus, 8, "author", 0.25, seed=7),
                tmp_path / f"run{run}.mmaf",
            )
        assert (tmp_path / "run0.mmaf").read_bytes() == (tmp_path / "run1.mmaf").read_bytes()

    def test_noise_clusters_by_label(self):
        labels = ("a", "b", "c", "d")
        corpus = corpus_of(
            *(painting(f"p{i}", author=labels[i % 4]) for i in range(200))
        )
        file = synthesize_features(corpus, dim=4, attribute="author", noise_sigma=0.1, seed=3)
        vecs = np.stack([file.records[p.id] for p in corpus.paintings])
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        sims = vecs @ vecs.T
        same = np.equal.outer(
            [p.author for p in corpus.paintings], [p.author for p in corpus.paintings]
        )
        off_diag = ~np.eye(len(vecs), dtype=bool)
        assert sims[same & off_diag].mean() > sims[~same].mean()

    def test_dim_too_small(self):
        with pytest.raises(ValueError, match="dim"):
            synthesize_features(small_corpus(), 1, "author", 0.0, seed=0)

    def test_id_attribute_gives_unique_basis(self):
        corpus = small_corpus(4)
        file = synthesize_features(corpus, dim=4, attribute="id", noise_sigma=0.0, seed=0)
        mat = np.stack([file.records[pid] for pid in sorted(file.records)])
        np.testing.assert_array_equal(mat, np.eye(4))

    def test_unseen_label_is_pure_noise(self):
        corpus = corpus_of(painting("a", author="x"), painting("b", split="test", author="y"))
        file = synthesize_features(corpus, 2, "author", 0.0, seed=0)
        np.testing.assert_array_equal(file.records["b"], np.zeros(2))


def test_missing_ids_reporting():
    corpus = small_corpus(3)
    file = FeatureFile(dim=2, records={"p0": np.zeros(2), "p2": np.zeros(2)})
    assert missing_ids(corpus, file, ["train"]) == ["p1"]


def test_export_tsv(tmp_path):
    file = FeatureFile(dim=2, records={"p": np.array([1.0, -2.5])})
    export_tsv(file, tmp_path / "f.tsv")
    assert (tmp_path / "f.tsv").read_text() == "p\t1.0,-2.5\n"
