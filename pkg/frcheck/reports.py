"""
Report persistence: one JSON file per invocation, plus CSV tables for
scaling runs
"""

import hashlib
import json
import logging
import os

import pandas as pd

from frcheck.geometry import PROPOSAL_ID

logger = logging.getLogger('reports')


def config_digest(config):
    """First 12 hex digits of the SHA-256 of the canonical config"""
    canonical = json.dumps(config.canonical(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def report_path(command, config, output_dir, suffix="json"):
    return os.path.join(output_dir, f"{command}-{config_digest(config)}.{suffix}")


def report_header(command, config):
    """Replay information stored at the top of every report"""
    return {
        "command": command,
        "config_digest": config_digest(config),
        "config_path": config.path,
        "seed": config.sampling.seed,
        "seed_recorded": config.seed_recorded,
        "proposal": PROPOSAL_ID,
        "sampling": config.sampling.to_dict(),
        "config": config.canonical(),
    }


def save_report(command, payload, config, output_dir):
    """
    Write {"header": ..., "report": payload} as indented JSON.

    Args:
        command: subcommand name, used in the file name
        payload: JSON-ready report body
        config: the RunConfig the command ran with
        output_dir: destination directory (created if missing)

    Returns:
        Path of the written file
    """
    filename = report_path(command, config, output_dir)
    os.makedirs(output_dir, exist_ok=True)

    with open(filename, 'w') as f:
        json.dump({"header": report_header(command, config), "report": payload}, f, indent=2)

    logger.info(f"Report saved to {filename}")
    return filename


def save_frame(command, frame, config, output_dir):
    """Write a report table as CSV next to the JSON report"""
    filename = report_path(command, config, output_dir, suffix="csv")
    os.makedirs(output_dir, exist_ok=True)
    frame.to_csv(filename, index=False)
    logger.info(f"Table saved to {filename}")
    return filename


def load_report(filename):
    """Read a report written by save_report"""
    with open(filename, 'r') as f:
        return json.load(f)


def scaling_frame(reports):
    """Stack the per-grid-point tables of several scaling reports"""
    return pd.concat([report.to_frame() for report in reports], ignore_index=True)
