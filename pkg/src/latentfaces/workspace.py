"""On-disk workspace layout and artifact plumbing for the pipeline stages.

A workspace root holds dataset/ (PGMs + manifest.json), models/ (the
trained autoencoder and PCA files), gallery/ (reconstructed PGMs, an
enrollment manifest, baselines.json), reports/ and bookmarks.json. Every
loader raises WorkspaceError naming the missing file so the CLI can point
at the stage that has not run yet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import autoencoder as ae
from . import latentpca as lp
from .errors import WorkspaceError
from .imaging import FaceImage, load_pgm, save_pgm
from .recognition import BaselineStats, EigenfacesSimulator, GalleryEntry, enroll
from .synthface import LabeledImage, load_dataset


@dataclass(frozen=True)
class Workspace:
    root: Path

    @property
    def dataset_dir(self) -> Path:
        return self.root / "dataset"

    @property
    def models_dir(self) -> Path:
        return self.root / "models"

    @property
    def gallery_dir(self) -> Path:
        return self.root / "gallery"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def autoencoder_path(self) -> Path:
        return self.models_dir / "autoencoder.lf01"

    @property
    def history_path(self) -> Path:
        return self.models_dir / "train_history.json"

    @property
    def pca_path(self) -> Path:
        return self.models_dir / "pca.lfpc"

    @property
    def separation_path(self) -> Path:
        return self.reports_dir / "separation.json"

    @property
    def gallery_manifest_path(self) -> Path:
        return self.gallery_dir / "manifest.json"

    @property
    def baselines_path(self) -> Path:
        return self.gallery_dir / "baselines.json"

    @property
    def bookmarks_path(self) -> Path:
        return self.root / "bookmarks.json"

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"


def open_workspace(root) -> Workspace:
    ws = Workspace(Path(root))
    ws.root.mkdir(parents=True, exist_ok=True)
    return ws


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise WorkspaceError(f"missing {path} — run `{stage}` first")
    return path


def load_dataset_artifacts(ws: Workspace) -> list[LabeledImage]:
    _require(ws.dataset_dir / "manifest.json", "gen")
    return load_dataset(ws.dataset_dir)


def load_autoencoder(ws: Workspace) -> ae.AutoencoderModel:
    return ae.load_model(_require(ws.autoencoder_path, "train"))


def load_pca(ws: Workspace) -> lp.PcaModel:
    return lp.load_pca(_require(ws.pca_path, "pca"))


def save_gallery(ws: Workspace, entries: list[GalleryEntry]) -> None:
    ws.gallery_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for e in entries:
        fname = f"{e.entry_id}.pgm"
        save_pgm(e.image, ws.gallery_dir / fname)
        manifest.append({"entry_id": e.entry_id, "label": e.label, "file": fname})
    with open(ws.gallery_manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_gallery(ws: Workspace) -> list[GalleryEntry]:
    path = _require(ws.gallery_manifest_path, "enroll")
    with open(path) as fh:
        manifest = json.load(fh)
    return [
        GalleryEntry(
            entry_id=row["entry_id"],
            label=row["label"],
            image=load_pgm(ws.gallery_dir / row["file"]),
        )
        for row in manifest
    ]


def load_enrolled(ws: Workspace) -> EigenfacesSimulator:
    """Re-derive the simulator from the stored gallery (deterministic)."""
    return enroll(load_gallery(ws))


def save_baselines(ws: Workspace, baselines: BaselineStats) -> None:
    ws.gallery_dir.mkdir(parents=True, exist_ok=True)
    with open(ws.baselines_path, "w") as fh:
        json.dump(baselines.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_baselines(ws: Workspace) -> BaselineStats:
    path = _require(ws.baselines_path, "enroll")
    with open(path) as fh:
        return BaselineStats.from_dict(json.load(fh))


def save_report(ws: Workspace, report) -> Path:
    ws.reports_dir.mkdir(parents=True, exist_ok=True)
    path = ws.reports_dir / f"report-{report.run_id}.json"
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_report_dict(ws: Workspace, run_id: str) -> dict:
    path = _require(ws.reports_dir / f"report-{run_id}.json", "sweep")
    with open(path) as fh:
        return json.load(fh)


def list_reports(ws: Workspace) -> list[str]:
    if not ws.reports_dir.exists():
        return []
    return sorted(
        p.stem.removeprefix("report-")
        for p in ws.reports_dir.glob("report-*.json")
    )


def load_bookmarks(ws: Workspace) -> list[dict]:
    if not ws.bookmarks_path.exists():
        return []
    with open(ws.bookmarks_path) as fh:
        return json.load(fh)


def save_bookmarks(ws: Workspace, bookmarks: list[dict]) -> None:
    with open(ws.bookmarks_path, "w") as fh:
        json.dump(bookmarks, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(ws: Workspace, explicit_path=None) -> dict:
    """Workspace config.json (or an explicit file); absent file is empty."""
    path = Path(explicit_path) if explicit_path else ws.config_path
    if not path.exists():
        if explicit_path:
            raise WorkspaceError(f"config file {path} not found")
        return {}
    with open(path) as fh:
        return json.load(fh)
