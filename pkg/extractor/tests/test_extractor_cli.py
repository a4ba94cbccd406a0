"""Command-line behavior, exit codes, and the downstream-consumer handshake."""

import json

import numpy as np
import pytest

from extractor import cli


@pytest.fixture()
def npz_dataset(tmp_path):
    rng = np.random.default_rng(11)
    archive = tmp_path / "tiny.npz"
    np.savez(
        archive,
        images=rng.integers(0, 256, size=(24, 5, 5, 3), dtype=np.uint8),
        labels=rng.integers(0, 3, size=24),
        class_names=np.array(["ant", "bee", "cat"]),
    )
    return archive


def test_extract_happy_path(npz_dataset, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(
        ["--dataset", f"npz:{npz_dataset}", "--backbone", "fake:16", "--output", str(out)]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "wrote 24 embeddings of width 16" in stdout
    assert "manifest:" in stdout
    for name in ("embeddings.onz", "proxies.onz", "labels.txt", "manifest.json"):
        assert (out / name).exists()


def test_custom_template_ensemble(npz_dataset, tmp_path):
    out = tmp_path / "out"
    code = cli.main(
        [
            "--dataset", f"npz:{npz_dataset}",
            "--backbone", "fake:16",
            "--output", str(out),
            "--template", "a photo of a {}.",
            "--template", "a drawing of a {}.",
        ]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert "prompt templates: 2" in manifest["notes"]


@pytest.mark.parametrize(
    "argv_tail",
    [
        ["--dataset", "npz:/nonexistent/file.npz", "--backbone", "fake"],
        ["--dataset", "imagenet", "--backbone", "fake"],
        ["--dataset", "npz:whatever.npz", "--backbone", "resnet50"],
        ["--dataset", "npz:whatever.npz", "--backbone", "fake:banana"],
        ["--dataset", "cifar10", "--backbone", "fake"],  # no --data-dir
    ],
)
def test_usage_errors_exit_two(tmp_path, argv_tail, capsys):
    code = cli.main(argv_tail + ["--output", str(tmp_path / "out")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_bad_batch_size_exits_two(npz_dataset, tmp_path, capsys):
    code = cli.main(
        [
            "--dataset", f"npz:{npz_dataset}",
            "--backbone", "fake",
            "--output", str(tmp_path / "out"),
            "--batch-size", "0",
        ]
    )
    assert code == 2
    assert "batch_size" in capsys.readouterr().err


def test_bad_template_exits_two(npz_dataset, tmp_path, capsys):
    code = cli.main(
        [
            "--dataset", f"npz:{npz_dataset}",
            "--backbone", "fake",
            "--output", str(tmp_path / "out"),
            "--template", "no placeholder here",
        ]
    )
    assert code == 2


def test_missing_local_cifar10_exits_one(tmp_path, capsys):
    # Exit 1 whether torchvision is absent or the local download is —
    # both are "dataset unavailable", not usage errors.
    code = cli.main(
        [
            "--dataset", "cifar10",
            "--data-dir", str(tmp_path / "no-data"),
            "--backbone", "fake",
            "--output", str(tmp_path / "out"),
        ]
    )
    assert code == 1
    assert "unavailable:" in capsys.readouterr().err


def test_outputs_feed_the_streaming_classifier(npz_dataset, tmp_path):
    # The whole point of the interchange files: the downstream engine must
    # accept them as-is, and with its learners switched off its predictions
    # must equal the nearest-proxy argmax recomputed here from the same
    # bytes.
    onzeta_cli = pytest.importorskip("onzeta.cli")
    from extractor.formats import read_matrix

    out = tmp_path / "out"
    assert (
        cli.main(
            ["--dataset", f"npz:{npz_dataset}", "--backbone", "fake:16", "--output", str(out)]
        )
        == 0
    )

    run_dir = tmp_path / "run"
    code = onzeta_cli.main(
        [
            "run",
            "--manifest", str(out / "manifest.json"),
            "--alpha", "0",
            "--beta", "0",
            "--output", str(run_dir),
        ]
    )
    assert code == 0

    report = json.loads((run_dir / "report.json").read_text())
    assert report["n"] == 24
    assert report["num_classes"] == 3

    embeddings = read_matrix(out / "embeddings.onz").astype(np.float64)
    proxies = read_matrix(out / "proxies.onz").astype(np.float64)
    proxies /= np.linalg.norm(proxies, axis=1, keepdims=True)
    baseline = np.argmax(embeddings @ proxies.T, axis=1)
    assert report["predictions"] == [int(p) for p in baseline]

    labels = np.array(
        [int(line) for line in (out / "labels.txt").read_text().split()]
    )
    assert report["accuracy"] == pytest.approx(float(np.mean(baseline == labels)))


def test_manifest_matches_consumer_writer_byte_for_byte(npz_dataset, tmp_path):
    dataio = pytest.importorskip("onzeta.dataio")

    out = tmp_path / "out"
    assert (
        cli.main(
            ["--dataset", f"npz:{npz_dataset}", "--backbone", "fake:16", "--output", str(out)]
        )
        == 0
    )
    ours = (out / "manifest.json").read_bytes()

    theirs_path = tmp_path / "reference.json"
    dataio.save_manifest(
        dataio.Manifest(
            embeddings_path="embeddings.onz",
            proxies_path="proxies.onz",
            class_names=["ant", "bee", "cat"],
            n_declared=24,
            labels_path="labels.txt",
            notes="backbone=fake:16; prompt templates: 7",
        ),
        theirs_path,
    )
    assert ours == theirs_path.read_bytes()
