#!/usr/bin/env python3
"""
reproduce_figures.py
--------------------
Regenerate every figure-class output from the experiment manifests in configs/.

Usage:
    python3 reproduce_figures.py              # every configs/*.json
    python3 reproduce_figures.py resonance    # only configs whose name contains "resonance"

Each config is run through ct.py in its own process; outputs land in figures/
as <config name>.<format>, and figures/manifest.json lists what was produced.
A failing job is logged and skipped; the script exits 1 at the end if any failed.
"""

import sys
import json
import subprocess
import logging
from pathlib import Path
from datetime import datetime

# Set up logging
log_dir = Path("logs")
log_dir.mkdir(exist_ok=True)
log_file = log_dir / f"reproduce_figures_{datetime.now().strftime('%Y%m%d')}.log"

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler(log_file),
        logging.StreamHandler(sys.stdout)
    ]
)

logger = logging.getLogger(__name__)

CONFIG_DIR = Path("configs")
FIGURE_DIR = Path("figures")


def run_config(config_path: Path) -> Path:
    """Run one manifest through ct.py; returns the output file."""
    with open(config_path, encoding="utf-8") as fh:
        config = json.load(fh)
    fmt = config.get("format", "json")
    out = FIGURE_DIR / f"{config_path.stem}.{fmt}"
    cmd = [sys.executable, "ct.py", config["command"], "--config", str(config_path),
           "--out", str(out)]
    logger.info(f"Running {' '.join(cmd)}")
    subprocess.run(cmd, capture_output=True, text=True, check=True)
    return out


def generate_manifest(outputs) -> Path:
    """Write figures/manifest.json listing every produced file."""
    files = sorted(outputs, key=lambda p: p.name)
    manifest = {
        "figures": [{"file": f.name, "size_bytes": f.stat().st_size} for f in files],
        "generated": datetime.now().isoformat(timespec="seconds"),
        "count": len(files),
        "note": "Auto-generated manifest of the outputs of configs/*.json"
    }
    manifest_path = FIGURE_DIR / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    logger.info(f"Generated manifest: {manifest_path} ({len(files)} files)")
    for i, f in enumerate(files, 1):
        logger.info(f"  {i}. {f.name} ({f.stat().st_size / 1024:.1f} KB)")
    return manifest_path


def main(argv=None):
    """Run every selected config and write the manifest."""
    argv = sys.argv[1:] if argv is None else argv
    logger.info("=" * 50)
    logger.info("Reproducing figures")
    logger.info("=" * 50)
    start_time = datetime.now()

    configs = sorted(CONFIG_DIR.glob("*.json"))
    if argv:
        configs = [c for c in configs if any(key in c.stem for key in argv)]
    if not configs:
        logger.error(f"No configs selected in {CONFIG_DIR}/")
        sys.exit(1)
    FIGURE_DIR.mkdir(exist_ok=True)

    outputs, failed = [], []
    for config_path in configs:
        try:
            out = run_config(config_path)
            outputs.append(out)
            logger.info(f"✅ {config_path.name} -> {out}")
        except subprocess.CalledProcessError as e:
            failed.append(config_path.name)
            logger.error(f"❌ {config_path.name} failed with exit code {e.returncode}")
            if e.stderr:
                logger.error(e.stderr.strip().splitlines()[-1])
        except (OSError, KeyError, json.JSONDecodeError) as e:
            failed.append(config_path.name)
            logger.error(f"❌ {config_path.name}: unreadable config ({e})")

    if outputs:
        generate_manifest(outputs)

    duration = datetime.now() - start_time
    logger.info(f"SUMMARY: {len(outputs)}/{len(configs)} configs reproduced in {duration}")
    if failed:
        logger.warning(f"⚠️  Failed: {', '.join(failed)}")
        sys.exit(1)
    logger.info("=" * 50)


if __name__ == "__main__":
    main()
