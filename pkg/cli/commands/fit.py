import argparse
from typing import Optional, Tuple

from cli.common import CommandContext, image_size, non_negative_float, pair, positive_float
from core.fitting.landmarks import CAMERA_KINDS
from core.models.fit import ContourFitConfig, OrthoFitConfig, PerspFitConfig
from core.services.fitting_service import FittingService
from utils.errors import EXIT_OK

def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--model", required=True, help="SMM1 shape model file")
    parser.add_argument("--landmarks", required=True, help="vertex_index,x,y landmark CSV")
    parser.add_argument("--camera", choices=CAMERA_KINDS, required=True)
    parser.add_argument("--reg", type=non_negative_float, default=None, help="Tikhonov weight (default GEOFIT_TIKHONOV_WEIGHT)")
    parser.add_argument("--bound-sigmas", type=positive_float, default=None,
                        help="clamp coefficients to +-K standard deviations (default 2, or 3 with --dense)")
    parser.add_argument("--dense", action="store_true", help="landmarks are dense vertex observations")
    parser.add_argument("--no-restarts", action="store_true", help="skip rotated restarts of the orthographic fit")
    parser.add_argument("--no-refine", action="store_true", help="skip the perspective reprojection refinement")
    parser.add_argument("--principal-point", type=pair, default=None, metavar="CX,CY",
                        help="default: image centre when the image size is known, else the origin")
    parser.add_argument("--image-size", type=image_size, default=None, metavar="W,H")
    parser.add_argument("--out", required=True, help="JSON fit report")
    parser.add_argument("--mesh", default=None, help="also write the fitted shape as OBJ")
    parser.add_argument("--boundary", default=None, help="also write the occluding boundary vertex ids")

def fit_config(args, size: Optional[Tuple[int, int]] = None):
    fields = {
        "dense": args.dense,
        "coeff_bound_sigmas": args.bound_sigmas,
        "restarts": not args.no_restarts,
    }
    if args.reg is not None:
        fields["tikhonov_weight"] = args.reg
    if args.camera == "ortho":
        return OrthoFitConfig(**fields)
    return PerspFitConfig(refine=not args.no_refine, principal_point=args.principal_point,
                          image_size=args.image_size or size, **fields)

def _write(service: FittingService, model, result, args):
    service.save_report(service.build_report(model, result), args.out)
    if args.mesh:
        service.export_mesh(model, result, args.mesh, args.boundary)

def fit_landmarks(args, ctx: CommandContext) -> int:
    service = ctx.service(FittingService)
    model = service.load_model(args.model)
    landmarks = service.load_landmarks(args.landmarks)
    result = service.fit_landmarks(model, landmarks, args.camera, fit_config(args), args.fix_tz)
    _write(service, model, result, args)
    return EXIT_OK

def fit_contours(args, ctx: CommandContext) -> int:
    service = ctx.service(FittingService)
    model = service.load_model(args.model)
    landmarks = service.load_landmarks(args.landmarks)
    edges = service.load_edges(args.edges, args.image, args.low, args.high)
    size = (edges.width, edges.height)
    fields = {"image_size": size, "landmark_fit": fit_config(args, size)}
    if args.rounds is not None:
        fields["max_rounds"] = args.rounds
    if args.percentile is not None:
        fields["percentile"] = args.percentile
    if args.max_distance is not None:
        fields["max_distance"] = args.max_distance
    result = service.fit_contours(model, landmarks, edges, args.camera, ContourFitConfig(**fields))
    _write(service, model, result, args)
    return EXIT_OK

def register(subparsers):
    parser = subparsers.add_parser("fit-landmarks", help="fit shape and camera to 2D landmarks")
    _add_common(parser)
    parser.add_argument("--fix-tz", type=positive_float, default=None, metavar="K",
                        help="freeze the subject-camera distance at K metres (perspective only)")
    parser.set_defaults(handler=fit_landmarks)

    parser = subparsers.add_parser("fit-contours", help="fit to landmarks and occluding contours")
    _add_common(parser)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--edges", help="edge mask (PBM/PGM) or x,y edge CSV")
    source.add_argument("--image", help="grayscale PGM; edges are detected in it")
    parser.add_argument("--low", type=positive_float, default=None, help="low hysteresis threshold")
    parser.add_argument("--high", type=positive_float, default=None, help="high hysteresis threshold")
    parser.add_argument("--rounds", type=int, default=None, help="maximum correspondence rounds")
    parser.add_argument("--percentile", type=positive_float, default=None,
                        help="keep pairs up to this distance percentile")
    parser.add_argument("--max-distance", type=positive_float, default=None, help="reject pairs farther (px)")
    parser.set_defaults(handler=fit_contours, fix_tz=None)
