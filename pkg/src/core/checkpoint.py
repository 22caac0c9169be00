"""
💾 Checkpoints - network grids, Adam state and the model manifest

Layout of `<name>.npz` (numpy archive, one float64 array per entry):

    __format_version__      int64 scalar, currently 1
    param/<grid name>       every parameter and BN running statistic
    adam/t                  int64 scalar step counter
    adam/hyper              float64 [lr, beta1, beta2, eps]
    adam/m/<grid name>      first moments
    adam/v/<grid name>      second moments
    extra/<key>             optional arrays (feature normalisation statistics)

Next to it, `<name>.manifest.json` holds the model configuration and seed so
the network can be rebuilt before the values are loaded.
"""

import json
import logging
import zipfile
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.core.model import OescnNetwork, build_model
from src.core.optim import AdamState
from src.utils.config import ModelConfig, to_jsonable, update_section
from src.utils.errors import InvalidArgumentError, InvalidDataError

FORMAT_VERSION = 1


def manifest_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def write_npz(path: Path, arrays: Dict[str, np.ndarray]) -> None:
    """
    🗜️ np.savez-compatible archive with fixed entry timestamps and sorted names

    Identical arrays always give identical bytes.
    """
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            with archive.open(info, "w", force_zip64=True) as handle:
                np.lib.format.write_array(handle, np.asanyarray(arrays[name]), allow_pickle=False)


def save_checkpoint(
    path: Path,
    network: OescnNetwork,
    adam: Optional[AdamState] = None,
    extra: Optional[Dict[str, np.ndarray]] = None,
    manifest: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    💾 Writes the archive and its manifest

    Returns:
        Path: The archive path (with .npz suffix)
    """
    path = Path(path).with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, np.ndarray] = {"__format_version__": np.array(FORMAT_VERSION, dtype=np.int64)}
    for name, value in network.state_dict().items():
        arrays[f"param/{name}"] = value
    if adam is not None:
        arrays["adam/t"] = np.array(adam.t, dtype=np.int64)
        arrays["adam/hyper"] = np.array([adam.lr, adam.beta1, adam.beta2, adam.eps])
        for name in sorted(adam.m):
            arrays[f"adam/m/{name}"] = adam.m[name]
            arrays[f"adam/v/{name}"] = adam.v[name]
    for key, value in (extra or {}).items():
        arrays[f"extra/{key}"] = np.asarray(value)

    write_npz(path, arrays)

    document = {"format_version": FORMAT_VERSION, "model": to_jsonable(network.cfg), "seed": network.seed}
    document.update(manifest or {})
    manifest_path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logging.info(f"💾 Checkpoint written to {path}")
    return path


def load_checkpoint(path: Path) -> Tuple[OescnNetwork, Optional[AdamState], Dict[str, np.ndarray], Dict[str, Any]]:
    """
    📂 Rebuilds the network from the manifest and loads every stored array

    Returns:
        (network, adam_state_or_None, extra_arrays, manifest)

    Raises:
        InvalidDataError: If the files are missing, unreadable or of another version
    """
    path = Path(path).with_suffix(".npz")
    try:
        manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise InvalidDataError(f"cannot read checkpoint {path}: {e}") from e

    with archive:
        version = int(archive["__format_version__"]) if "__format_version__" in archive.files else -1
        if version != FORMAT_VERSION or manifest.get("format_version") != FORMAT_VERSION:
            raise InvalidDataError(f"unsupported checkpoint version {version} in {path}")
        arrays = {name: archive[name] for name in archive.files}

    try:
        cfg = update_section(ModelConfig(), manifest["model"])
    except (KeyError, InvalidArgumentError) as e:
        raise InvalidDataError(f"checkpoint manifest has no usable model config: {e}") from e
    network = build_model(cfg, int(manifest.get("seed", 0)))
    network.load_state_dict({name[len("param/"):]: value for name, value in arrays.items() if name.startswith("param/")})

    adam = None
    if "adam/t" in arrays:
        lr, beta1, beta2, eps = (float(x) for x in arrays["adam/hyper"])
        adam = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=int(arrays["adam/t"]))
        for name, value in arrays.items():
            if name.startswith("adam/m/"):
                adam.m[name[len("adam/m/"):]] = value.copy()
            elif name.startswith("adam/v/"):
                adam.v[name[len("adam/v/"):]] = value.copy()

    extra = {name[len("extra/"):]: value for name, value in arrays.items() if name.startswith("extra/")}
    return network, adam, extra, manifest
