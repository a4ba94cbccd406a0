"""Byte-level pins for the interchange files the extractor emits."""

import json
import struct

import numpy as np
import pytest

from extractor.formats import (
    MAGIC,
    MatrixFormatError,
    read_matrix,
    require_unit_rows,
    write_labels,
    write_manifest,
    write_matrix,
)


def test_matrix_header_and_payload_bytes(tmp_path):
    path = tmp_path / "m.onz"
    rows = np.array([[1.0, -0.5, 0.25], [0.125, 2.0, -4.0]])
    write_matrix(rows, path)
    raw = path.read_bytes()
    assert raw[:4] == b"ONZ1"
    assert raw[:4] == MAGIC
    assert struct.unpack("<II", raw[4:12]) == (2, 3)
    expected_payload = np.ascontiguousarray(rows, dtype="<f4").tobytes(order="C")
    assert raw[12:] == expected_payload
    assert len(raw) == 12 + 2 * 3 * 4


def test_matrix_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((7, 5)).astype(np.float32)
    path = tmp_path / "m.onz"
    write_matrix(rows, path)
    back = read_matrix(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, rows)


@pytest.mark.parametrize(
    "bad",
    [
        np.ones(4),                      # not 2-D
        np.ones((0, 3)),                 # no rows
        np.ones((3, 0)),                 # no columns
        np.array([[1.0, np.inf]]),       # non-finite
        np.array([[np.nan, 0.0]]),
    ],
)
def test_write_matrix_rejects_bad_input(tmp_path, bad):
    with pytest.raises(ValueError):
        write_matrix(bad, tmp_path / "m.onz")


def test_read_matrix_rejects_bad_magic(tmp_path):
    path = tmp_path / "m.onz"
    write_matrix(np.ones((2, 2)), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(MatrixFormatError):
        read_matrix(path)


def test_read_matrix_rejects_truncated_payload(tmp_path):
    path = tmp_path / "m.onz"
    write_matrix(np.ones((2, 2)), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(MatrixFormatError):
        read_matrix(path)


def test_read_matrix_rejects_short_header(tmp_path):
    path = tmp_path / "m.onz"
    path.write_bytes(b"ONZ1\x01")
    with pytest.raises(MatrixFormatError):
        read_matrix(path)


def test_labels_file_is_one_integer_per_line(tmp_path):
    path = tmp_path / "labels.txt"
    write_labels(np.array([3, 0, 2]), path)
    assert path.read_text() == "3\n0\n2\n"


def test_labels_reject_matrix_input(tmp_path):
    with pytest.raises(ValueError):
        write_labels(np.ones((2, 2)), tmp_path / "labels.txt")


def test_require_unit_rows_accepts_within_tolerance():
    rows = np.array([[1.0 + 9e-4, 0.0], [0.0, 1.0 - 9e-4]])
    require_unit_rows(rows, "rows")


def test_require_unit_rows_rejects_and_names_the_row():
    rows = np.array([[1.0, 0.0], [0.0, 1.01]])
    with pytest.raises(ValueError, match="row 1"):
        require_unit_rows(rows, "rows")


def test_manifest_fields_and_formatting(tmp_path):
    path = tmp_path / "manifest.json"
    write_manifest(
        path,
        embeddings_path="embeddings.onz",
        proxies_path="proxies.onz",
        class_names=["ant", "bee"],
        n_declared=12,
        labels_path="labels.txt",
        notes="backbone=fake",
    )
    text = path.read_text()
    assert text.endswith("\n")
    payload = json.loads(text)
    assert payload == {
        "embeddings_path": "embeddings.onz",
        "proxies_path": "proxies.onz",
        "class_names": ["ant", "bee"],
        "n_declared": 12,
        "labels_path": "labels.txt",
        "notes": "backbone=fake",
    }
    # keys are sorted so identical field values give identical bytes
    assert text == json.dumps(payload, indent=2, sort_keys=True) + "\n"


def test_manifest_optional_fields_default(tmp_path):
    path = tmp_path / "manifest.json"
    write_manifest(
        path,
        embeddings_path="e.onz",
        proxies_path="p.onz",
        class_names=["x"],
        n_declared=1,
    )
    payload = json.loads(path.read_text())
    assert payload["labels_path"] is None
    assert payload["notes"] == ""


@pytest.mark.parametrize(
    "kwargs",
    [
        {"class_names": [], "n_declared": 1},
        {"class_names": ["x"], "n_declared": 0},
    ],
)
def test_manifest_rejects_bad_metadata(tmp_path, kwargs):
    with pytest.raises(ValueError):
        write_manifest(
            tmp_path / "manifest.json",
            embeddings_path="e.onz",
            proxies_path="p.onz",
            **kwargs,
        )
