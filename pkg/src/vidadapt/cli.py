"""Command-line entry points: encode, decode, evaluate.

Exit codes: 0 success, 2 configuration error, 3 adapter/tool failure,
4 malformed data. All failures print one machine-parsable line to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import cnn, metrics, pipeline, qro
from .errors import AdapterError, ConfigError, FormatError
from .video_io import ChromaFormat, read_raw_video, write_raw_video

LOW_QP_SET = (22, 27, 32, 37)
HIGH_QP_SET = (27, 32, 37, 42)


def _add_geometry_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--bitdepth", type=int, default=10)
    p.add_argument("--fps", type=float, default=30.0)


def _add_adapter_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--adapter-encode", help="host encoder command template")
    p.add_argument("--adapter-decode", help="host decoder command template")
    p.add_argument("--codec-id", default="host",
                   help="codec identifier used for model selection")


def _build_adapter(args) -> pipeline.CodecAdapter:
    encode_tpl = args.adapter_encode or args.adapter_decode
    decode_tpl = args.adapter_decode or args.adapter_encode
    if not encode_tpl:
        raise ConfigError("an adapter command template is required")
    return pipeline.CodecAdapter(encode_tpl, decode_tpl, args.codec_id)


def _write_log(out_path: Path, payload: dict) -> None:
    log_path = out_path.with_name(out_path.name + ".json")
    log_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def cmd_encode(args) -> int:
    adapter = _build_adapter(args)
    if not args.adapter_encode:
        raise ConfigError("encode needs --adapter-encode")
    video = read_raw_video(args.input, args.width, args.height, args.bitdepth,
                           ChromaFormat.C420, args.fps)
    force = None
    qro_model = None
    if args.force_mode == "ebd":
        force = pipeline.AdaptationMode.EBD_ONLY
    elif args.force_mode == "sr-ebd":
        force = pipeline.AdaptationMode.SR_EBD
    else:
        if not args.qro_model:
            raise ConfigError("automatic mode needs --qro-model (or use --force-mode)")
        qro_model = qro.load_mlp(args.qro_model)
    result = pipeline.encode_video(video, args.qp, adapter, qro_model=qro_model,
                                   gop_len=args.gop, force_mode=force,
                                   workdir=args.workdir)
    out = Path(args.out)
    out.write_bytes(result.stream)
    _write_log(out, {
        "command": "encode", "input_frames": len(video),
        "qp_base": args.qp, "gop_len": args.gop,
        "force_mode": args.force_mode, "codec": adapter.codec_id,
        "segments": result.segments, "gops": result.gops,
    })
    print(f"wrote {len(result.stream)} bytes in {len(result.segments)} segment(s) to {out}")
    return 0


def cmd_decode(args) -> int:
    adapter = _build_adapter(args)
    if not args.adapter_decode:
        raise ConfigError("decode needs --adapter-decode")
    cnn_enabled = not args.no_cnn
    weights = None
    if cnn_enabled:
        if not args.weights:
            raise ConfigError("decoding with the network needs --weights (or pass --no-cnn)")
        if args.qp is None:
            raise ConfigError("decoding with the network needs --qp for model selection")
        weights = cnn.load_weights(args.weights)
    stream = Path(args.stream).read_bytes()
    result = pipeline.decode_video(
        stream, adapter, weights=weights, qp_base=args.qp,
        cnn_enabled=cnn_enabled,
        pre_cnn_upsample="lanczos3" if args.baseline_upsample else "nearest",
        workdir=args.workdir)
    out = Path(args.out)
    write_raw_video(result.video, out)
    _write_log(out, {
        "command": "decode", "frames": len(result.video),
        "cnn_enabled": cnn_enabled, "qp_base": args.qp,
        "codec": adapter.codec_id, "segments": result.segments,
    })
    print(f"decoded {len(result.video)} frame(s) to {out}")
    return 0


def _bd_columns(anchor_rows, test_rows, qp_set, quality_of, metric):
    anchor = {r.qp: r for r in anchor_rows}
    test = {r.qp: r for r in test_rows}
    if not all(q in anchor and q in test for q in qp_set):
        return None
    if any(quality_of(anchor[q]) is None or quality_of(test[q]) is None for q in qp_set):
        return None
    a_pts = sorted(((anchor[q].bitrate_kbps, quality_of(anchor[q])) for q in qp_set))
    t_pts = sorted(((test[q].bitrate_kbps, quality_of(test[q])) for q in qp_set))
    try:
        curve_a = metrics.RdCurve([metrics.RdPoint(*p) for p in a_pts], metric)
        curve_t = metrics.RdCurve([metrics.RdPoint(*p) for p in t_pts], metric)
        return {
            "bd_rate_pct": metrics.bd_metric(curve_a, curve_t, metrics.BdKind.BD_RATE),
            "bd_quality": metrics.bd_metric(curve_a, curve_t, metrics.BdKind.BD_QUALITY),
        }
    except ConfigError:
        # degenerate curves (constant quality, duplicate rates) have no BD
        return None


def _bd_table(rows: list[metrics.RdRow], labels: list[str], with_vmaf: bool) -> dict:
    by_label: dict[str, list[metrics.RdRow]] = {}
    for r in rows:
        by_label.setdefault(r.codec, []).append(r)
    anchor = labels[0]
    table: dict = {"anchor": anchor, "labels": {}}
    for label in labels:
        entry: dict = {}
        for set_name, qp_set in (("low_qps", LOW_QP_SET), ("high_qps", HIGH_QP_SET)):
            entry[f"psnr_{set_name}"] = _bd_columns(
                by_label[anchor], by_label[label], qp_set,
                lambda r: r.psnr_db, metrics.RdMetric.PSNR)
            if with_vmaf:
                entry[f"vmaf_{set_name}"] = _bd_columns(
                    by_label[anchor], by_label[label], qp_set,
                    lambda r: r.vmaf, metrics.RdMetric.VMAF)
        table["labels"][label] = entry
    return table


def _print_bd_table(table: dict) -> None:
    print(f"BD results vs anchor '{table['anchor']}':")
    for label, entry in table["labels"].items():
        parts = [f"  {label}:"]
        for col, values in entry.items():
            if values is None:
                parts.append(f"{col}=n/a")
            else:
                parts.append(f"{col}: rate {values['bd_rate_pct']:+.2f}% "
                             f"quality {values['bd_quality']:+.3f}")
        print(" ".join(parts))


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    original = read_raw_video(args.original, args.width, args.height,
                              args.bitdepth, ChromaFormat.C420, args.fps)
    runs = json.loads(Path(args.runs).read_text())
    if not isinstance(runs, list) or not runs:
        raise ConfigError("runs manifest must be a non-empty JSON list")
    labels: list[str] = []
    rows: list[metrics.RdRow] = []
    seq_name = Path(args.original).stem
    for run in runs:
        try:
            label, qp = run["label"], float(run["qp"])
            decoded_path, stream_path = run["decoded"], run["stream"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"run entry missing field: {exc}") from exc
        if label not in labels:
            labels.append(label)
        decoded = read_raw_video(decoded_path, args.width, args.height,
                                 args.bitdepth, ChromaFormat.C420, args.fps)
        if len(decoded) != len(original):
            raise ConfigError(
                f"{decoded_path}: {len(decoded)} frames vs original {len(original)}")
        psnr = float(sum(metrics.psnr_luma(r, t) for r, t
                         in zip(original.frames, decoded.frames)) / len(original))
        stream_bytes = Path(stream_path).stat().st_size
        duration = len(decoded) / args.fps
        bitrate = stream_bytes * 8.0 / duration / 1000.0
        rows.append(metrics.RdRow(seq_name, label, qp, bitrate, psnr))

    csv_path = out_dir / "rd_points.csv"
    bd_path = out_dir / "bd_table.json"
    metrics.write_rd_csv(rows, csv_path)
    table = _bd_table(rows, labels, with_vmaf=False)
    bd_path.write_text(json.dumps(table, sort_keys=True, indent=2) + "\n")

    if args.vmaf_cmd:
        # PSNR outputs above survive even if the external tool is missing.
        for row, run in zip(rows, runs):
            row.vmaf = metrics.vmaf_external(args.original, run["decoded"],
                                             args.width, args.height,
                                             args.bitdepth, args.vmaf_cmd)
        metrics.write_rd_csv(rows, csv_path)
        table = _bd_table(rows, labels, with_vmaf=True)
        bd_path.write_text(json.dumps(table, sort_keys=True, indent=2) + "\n")

    _print_bd_table(table)
    print(f"wrote {csv_path} and {bd_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidadapt",
        description="Adaptive-resolution/bit-depth coding wrapper and RD evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="adapt and encode a raw video")
    enc.add_argument("input", help="raw planar video file")
    enc.add_argument("--out", required=True, help="output stream path")
    _add_geometry_args(enc)
    _add_adapter_args(enc)
    enc.add_argument("--qp", type=float, required=True, help="initial base QP")
    enc.add_argument("--gop", type=int, default=16, help="GOP length in frames")
    enc.add_argument("--qro-model", help="decision-network file for automatic mode")
    enc.add_argument("--force-mode", choices=["ebd", "sr-ebd", "auto"], default="auto")
    enc.add_argument("--workdir", help="directory for temporary files")
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", help="decode a stream and restore the video")
    dec.add_argument("stream", help="stream file produced by encode")
    dec.add_argument("--out", required=True, help="output raw video path")
    _add_adapter_args(dec)
    dec.add_argument("--qp", type=float, help="initial base QP (model selection)")
    dec.add_argument("--weights", help="model bank file")
    dec.add_argument("--no-cnn", action="store_true",
                     help="reconstruct with Lanczos3 + left shift instead of the network")
    dec.add_argument("--baseline-upsample", action="store_true",
                     help="use Lanczos3 instead of nearest before the network")
    dec.add_argument("--workdir", help="directory for temporary files")
    dec.set_defaults(func=cmd_decode)

    ev = sub.add_parser("evaluate", help="RD points and BD deltas for decoded runs")
    ev.add_argument("original", help="reference raw video")
    ev.add_argument("runs", help="JSON manifest: [{label, qp, decoded, stream}, ...]")
    ev.add_argument("--out", required=True, help="output directory")
    _add_geometry_args(ev)
    ev.add_argument("--vmaf-cmd", help="external VMAF command template "
                                       "({ref} {dist} {width} {height})")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    except AdapterError as exc:
        print(f"error[adapter]: {exc}", file=sys.stderr)
        return 3
    except FormatError as exc:
        print(f"error[format]: {exc}", file=sys.stderr)
        return 4
    except (OSError, ValueError) as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
