"""Command-line interface: ``scsc <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numerical failure.
"""

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path


from . import io, metrics, pipeline, trainer
from .errors import NumericalError, SCSCError

IMAGE_SUFFIXES = (".pgm", ".png")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from exc


def resolve_images(entries):
    """Expand directories and comma-separated lists into sorted image paths."""
    paths = []
    for entry in entries:
        for part in str(entry).split(","):
            if not part:
                continue
            p = Path(part)
            if p.is_dir():
                paths.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
            else:
                paths.append(p)
    if not paths:
        raise UsageError("no input images given")
    return paths


def label_paths(image_paths, label_dir):
    label_dir = Path(label_dir)
    out = []
    for p in image_paths:
        for suffix in IMAGE_SUFFIXES:
            cand = label_dir / (p.stem + suffix)
            if cand.exists():
                out.append(cand)
                break
        else:
            raise FileNotFoundError(f"no label image for {p.name} in {label_dir}")
    return out


def _load_set(images, labels):
    paths = resolve_images(images)
    imgs = [io.load_image(p) for p in paths]
    fields = [io.load_labels(p) for p in label_paths(paths, labels)] if labels else None
    return paths, imgs, fields


def _add_solver_args(p):
    p.add_argument("--k", type=int, default=8, help="number of filters")
    p.add_argument("--filter-size", type=int, default=11)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--outer-iters", type=int, default=15)
    p.add_argument("--inner-iters", type=int, default=10)
    p.add_argument("--code-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-cap", type=int, default=10000)
    p.add_argument("--no-center-positives", action="store_true")
    p.add_argument("--exact-fourier-solve", action="store_true",
                   help="direct per-bin solve when every pixel is labeled")


def _config(args):
    return trainer.SolverConfig(
        beta=args.beta, gamma=args.gamma, alpha=args.alpha, rho=args.rho,
        n_filters=args.k, filter_size=args.filter_size, outer_iters=args.outer_iters,
        inner_iters=args.inner_iters, code_iters=args.code_iters, tol=args.tol,
        seed=args.seed, sample_cap=args.sample_cap,
        center_positives=not args.no_center_positives,
        exact_fourier_solve=args.exact_fourier_solve)


def build_parser():
    parser = _Parser(prog="scsc", description="Supervised convolutional sparse coding")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", help="learn filters (and classifier) from images")
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--labels", help="directory of label images matched by file stem")
    _add_solver_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="trace CSV path (default: <out>.trace.csv)")

    p = sub.add_parser("code", help="sparse maps of one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--iters", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("reconstruct", help="code and reconstruct one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--psnr", action="store_true", help="print the valid-region PSNR")
    p.add_argument("--out", help="write the reconstruction image")

    p = sub.add_parser("inpaint", help="reconstruct an image from a random pixel subset")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--drop-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the inpainted image")
    p.add_argument("--baseline", action="store_true", help="also print mean-fill PSNR")

    p = sub.add_parser("eval", help="pixel AP and PSNR on labeled images")
    p.add_argument("--model", required=True)
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--retrain-classifier", action="store_true")
    p.add_argument("--train-images", nargs="+",
                   help="images to retrain on (default: the evaluation images)")
    p.add_argument("--train-labels")
    p.add_argument("--per-image-ap", action="store_true")
    p.add_argument("--scores-out", help="directory for per-pixel score images")

    p = sub.add_parser("export-filters", help="write the filters as a mosaic image")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cell-scale", type=int, default=1)

    p = sub.add_parser("sweep", help="train and evaluate over a parameter grid")
    p.add_argument("--param", choices=("gamma", "k", "n"), required=True)
    p.add_argument("--values", type=_float_list, required=True)
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--test-images", nargs="+")
    p.add_argument("--test-labels")
    p.add_argument("--no-retrain", action="store_true",
                   help="score with the trained classifier instead of a retrained one")
    _add_solver_args(p)
    p.add_argument("--out", required=True)
    return parser


def cmd_train(args):
    _, imgs, fields = _load_set(args.images, args.labels)
    cfg = _config(args)
    model, _, trace = trainer.fit(imgs, None, fields, cfg)
    io.save_model(model, args.out)
    io.write_trace(args.trace or f"{args.out}.trace.csv", trace)
    return 0


def cmd_code(args):
    model = io.load_model(args.model)
    z, _, _ = trainer.code_image(model, io.load_image(args.image), max_iter=args.iters)
    io.save_maps(args.out, z, model.config.filter_size)
    return 0


def cmd_reconstruct(args):
    model = io.load_model(args.model)
    image = io.load_image(args.image)
    recon, _ = pipeline.reconstruct_image(model, image)
    if args.out:
        io.save_image(args.out, recon)
    if args.psnr or not args.out:
        print(f"psnr={io.format_float(metrics.psnr(image, recon))}")
    return 0


def cmd_inpaint(args):
    model = io.load_model(args.model)
    image = io.load_image(args.image)
    value, recon, mask = pipeline.inpaint(model, image, args.drop_fraction, args.seed)
    if args.out:
        io.save_image(args.out, recon)
    print(f"psnr={io.format_float(value)}")
    if args.baseline:
        base = metrics.psnr(image, pipeline.mean_fill(image, mask))
        print(f"baseline_psnr={io.format_float(base)}")
    return 0


def cmd_eval(args):
    model = io.load_model(args.model)
    paths, imgs, fields = _load_set(args.images, args.labels)
    theta = None
    if args.retrain_classifier:
        if args.train_images:
            _, t_imgs, t_fields = _load_set(args.train_images, args.train_labels or args.labels)
        else:
            t_imgs, t_fields = imgs, fields
        theta = pipeline.retrain_classifier(model, t_imgs, t_fields)
    ap, psnr, scores = pipeline.evaluate(model, imgs, fields, theta, args.per_image_ap)
    if args.scores_out:
        out = Path(args.scores_out)
        out.mkdir(parents=True, exist_ok=True)
        for p, s in zip(paths, scores):
            io.save_image(out / f"{p.stem}_scores.pgm", s)
    print(f"ap={io.format_float(ap)}")
    print(f"psnr={io.format_float(psnr)}")
    return 0


def cmd_export(args):
    model = io.load_model(args.model)
    io.export_filter_mosaic(model.bank, args.out, args.cell_scale)
    return 0


def run_sweep(param, values, base, train_imgs, train_fields, test_imgs, test_fields,
              retrain=True):
    """Rows ``(param_value, ap, psnr, wall_seconds)``, one per value in order."""
    rows = []
    for value in values:
        start = time.perf_counter()
        imgs, fields = train_imgs, train_fields
        if param == "gamma":
            cfg = dataclasses.replace(base, gamma=float(value))
        elif param == "k":
            cfg = dataclasses.replace(base, n_filters=int(value))
        else:
            n = int(value)
            if not 1 <= n <= len(train_imgs):
                raise UsageError(f"n={n} outside 1..{len(train_imgs)}")
            cfg, imgs, fields = base, train_imgs[:n], train_fields[:n]
        model, _, _ = trainer.fit(imgs, None, fields, cfg)
        theta = pipeline.retrain_classifier(model, imgs, fields) if retrain else None
        ap, psnr, _ = pipeline.evaluate(model, test_imgs, test_fields, theta)
        label = int(value) if param in ("k", "n") else float(value)
        rows.append([label, float(ap), float(psnr), time.perf_counter() - start])
    return rows


def cmd_sweep(args):
    _, imgs, fields = _load_set(args.images, args.labels)
    if args.test_images:
        _, t_imgs, t_fields = _load_set(args.test_images, args.test_labels or args.labels)
    else:
        t_imgs, t_fields = imgs, fields
    rows = run_sweep(args.param, args.values, _config(args), imgs, fields, t_imgs,
                     t_fields, retrain=not args.no_retrain)
    io.write_csv(args.out, io.SWEEP_HEADER, rows)
    return 0


COMMANDS = {
    "train": cmd_train,
    "code": cmd_code,
    "reconstruct": cmd_reconstruct,
    "inpaint": cmd_inpaint,
    "eval": cmd_eval,
    "export-filters": cmd_export,
    "sweep": cmd_sweep,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_help(sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"scsc: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (SCSCError, OSError) as exc:
        print(f"scsc: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
