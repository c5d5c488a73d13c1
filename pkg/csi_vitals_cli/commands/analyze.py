"""Vital-sign analysis commands for CSI Vitals CLI."""
from pathlib import Path
from typing import Optional

import typer

from ..config import get_config
from ..output import handle_error, print_info, print_json, print_success, print_table
from ..pipeline import denoised_amplitude, evaluate_against_truth, run_pipeline, segment_series
from ..trace_io import (
    atomic_write,
    load_trace,
    read_report,
    read_truth,
    write_report,
    write_segments_csv,
)


def analyze(
    input_path: Path = typer.Option(
        ..., "--in", "-i", exists=True, dir_okay=False, help="WITL trace or CSV capture"
    ),
    report: Optional[Path] = typer.Option(
        None, "--report", "-r", dir_okay=False, help="Write the JSON report here instead of stdout"
    ),
    window_s: Optional[float] = typer.Option(None, "--window-s", help="Analysis window (s)"),
    step_s: Optional[float] = typer.Option(None, "--step-s", help="Window step (s)"),
    gate: Optional[float] = typer.Option(None, "--gate", help="Presence gate prominence ratio"),
):
    """
    Estimate breathing and heart rates over windows of motion-free CSI.

    Gated windows are reported as null; an all-null report is a valid result.

    Examples:
        csi-vitals analyze --in trace.witl
        csi-vitals analyze --in trace.witl --report report.json --window-s 20 --gate 6
    """
    try:
        cfg = get_config().pipeline_config(window_s=window_s, step_s=step_s, gate_ratio=gate)
        result = run_pipeline(load_trace(input_path), cfg)
        text = write_report(result)

        if report:
            atomic_write(report, text)
            breathing = sum(1 for w in result.windows if w.breathing is not None)
            heart = sum(1 for w in result.windows if w.heart is not None)
            print_success(
                f"{len(result.windows)} windows ({breathing} breathing, {heart} heart), "
                f"{len(result.motion_segments)} motion segments -> {report}"
            )
        else:
            print_json(text)
    except Exception as e:
        exit_code = handle_error(e)
        raise typer.Exit(exit_code)


def segment(
    input_path: Path = typer.Option(
        ..., "--in", "-i", exists=True, dir_okay=False, help="WITL trace or CSV capture"
    ),
    v: Optional[float] = typer.Option(None, "--v", help="Activation factor (default 2.5)"),
    out_csv: Optional[Path] = typer.Option(
        None, "--out-csv", dir_okay=False, help="Write start_s,end_s,label CSV here"
    ),
):
    """
    Split a trace into Vital and OtherMotion segments.

    Examples:
        csi-vitals segment --in trace.witl
        csi-vitals segment --in trace.witl --v 3 --out-csv segments.csv
    """
    try:
        trace = load_trace(input_path)
        seg_cfg = get_config().segmentation_config(activation_factor=v)
        _, denoised = denoised_amplitude(trace)
        segments = segment_series(denoised, seg_cfg)

        if out_csv:
            atomic_write(out_csv, write_segments_csv(segments, trace.sample_rate))
            print_success(f"{len(segments)} segments -> {out_csv}")
        else:
            fs = trace.sample_rate
            rows = [
                {"start_s": s.start / fs, "end_s": s.end / fs, "label": s.label.value}
                for s in segments
            ]
            print_table(rows, ["start_s", "end_s", "label"])
    except Exception as e:
        exit_code = handle_error(e)
        raise typer.Exit(exit_code)


def evaluate(
    report: Path = typer.Option(..., "--report", "-r", exists=True, dir_okay=False),
    truth: Path = typer.Option(..., "--truth", "-t", exists=True, dir_okay=False),
):
    """
    Score a report against a simulator ground-truth sidecar.

    Examples:
        csi-vitals evaluate --report report.json --truth trace.truth.json
    """
    try:
        result = evaluate_against_truth(
            read_report(report.read_text(encoding="utf-8")),
            read_truth(truth.read_text(encoding="utf-8")),
        )
        rows = [
            {
                "vital": name,
                "windows": score.window_count,
                "mae_bpm": score.mean_abs_error_bpm,
                "accuracy_pct": score.accuracy_percent,
            }
            for name, score in (("breathing", result.breathing), ("heart", result.heart))
        ]
        print_table(rows, ["vital", "windows", "mae_bpm", "accuracy_pct"], title="Rates")

        if result.boundary_errors:
            boundaries = [
                {
                    "event_s": f"{b.true_start_s:g}-{b.true_end_s:g}",
                    "start_err_s": b.start_error_s,
                    "end_err_s": b.end_error_s,
                }
                for b in result.boundary_errors
            ]
            print_table(boundaries, ["event_s", "start_err_s", "end_err_s"], title="Motion")
        else:
            print_info("No motion events in ground truth")
    except Exception as e:
        exit_code = handle_error(e)
        raise typer.Exit(exit_code)
