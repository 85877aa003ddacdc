from cli.common import (CommandContext, add_seed, add_threads, distance_list, float_list, non_negative_float,
                        positive_distances, positive_int, seed_range)
from core.models.fit import OrthoFitConfig, PerspFitConfig
from core.services.experiment_service import ExperimentService
from core.services.fitting_service import FittingService
from utils.errors import EXIT_OK

def _config(args, kind=PerspFitConfig):
    return kind(tikhonov_weight=args.reg) if args.reg is not None else kind()

def ambiguity_sweep(args, ctx: CommandContext) -> int:
    service = ctx.service(ExperimentService, args.threads)
    model = service.load_model(args.model)
    rows = service.ambiguity(model, seed_range(args.seed, args.seeds), args.gen_dist, args.fit_dist, _config(args))
    service.save_table("ambiguity", rows, args.out)
    return EXIT_OK

def compare_als(args, ctx: CommandContext) -> int:
    service = ctx.service(ExperimentService, args.threads)
    model = service.load_model(args.model)
    rows = service.compare_als(model, seed_range(args.seed, args.seeds), args.noise_px, _config(args, OrthoFitConfig))
    service.save_table("compare_als", rows, args.out)
    return EXIT_OK

def distance_sweep(args, ctx: CommandContext) -> int:
    service = ctx.service(ExperimentService, args.threads)
    model = service.load_model(args.model)
    landmarks = ctx.service(FittingService).load_landmarks(args.landmarks)
    rows = service.distance_sweep(model, landmarks, args.distances, _config(args))
    service.save_table("distance_sweep", rows, args.out)
    return EXIT_OK

def pose_sweep(args, ctx: CommandContext) -> int:
    service = ctx.service(ExperimentService, args.threads)
    model = service.load_model(args.model)
    rows = service.pose_sweep(model, seed_range(args.seed, args.seeds), args.yaws, args.noise_px, args.seed,
                              _config(args, OrthoFitConfig))
    service.save_table("pose_sweep", rows, args.out)
    return EXIT_OK

def ortho_limit(args, ctx: CommandContext) -> int:
    service = ctx.service(ExperimentService, args.threads)
    model = service.load_model(args.model)
    rows = service.ortho_limit(model, seed_range(args.seed, args.seeds), sorted(args.distances))
    service.save_table("ortho_limit", rows, args.out)
    return EXIT_OK

def distance_bias(args, ctx: CommandContext) -> int:
    service = ctx.service(ExperimentService, args.threads)
    model = service.load_model(args.model)
    rows = service.distance_bias(model, seed_range(args.seed, args.seeds), args.distances, _config(args))
    service.save_table("distance_bias", rows, args.out)
    return EXIT_OK

def _parser(subparsers, name: str, help_text: str, handler, seeds: int = 10):
    parser = subparsers.add_parser(name, help=help_text)
    add_seed(parser)
    add_threads(parser)
    parser.add_argument("--model", required=True)
    parser.add_argument("--seeds", type=positive_int, default=seeds, help="number of synthetic instances")
    parser.add_argument("--reg", type=non_negative_float, default=None, help="Tikhonov weight")
    parser.add_argument("--out", required=True, help="CSV table")
    parser.set_defaults(handler=handler)
    return parser

def register(subparsers):
    parser = _parser(subparsers, "ambiguity-sweep", "fit at assumed distances other than the true one",
                     ambiguity_sweep)
    parser.add_argument("--gen-dist", type=distance_list, default=[0.3, 0.6, 1.2, 2.4],
                        help="generating distances (m), 'ortho' allowed")
    parser.add_argument("--fit-dist", type=distance_list, default=[0.3, 0.6, 1.2, 2.4, "ortho"],
                        help="assumed distances (m), 'ortho' allowed")

    parser = _parser(subparsers, "compare-als", "SNLS against alternating least squares", compare_als, seeds=50)
    parser.add_argument("--noise-px", type=non_negative_float, default=1.0)

    parser = _parser(subparsers, "distance-sweep", "best fits of one landmark set at fixed distances",
                     distance_sweep, seeds=1)
    parser.add_argument("--landmarks", required=True)
    parser.add_argument("--distances", type=positive_distances, required=True)

    parser = _parser(subparsers, "pose-sweep", "orthographic fitting accuracy against yaw", pose_sweep)
    parser.add_argument("--yaws", type=float_list, default=[-30.0, -15.0, 0.0, 15.0, 30.0], help="degrees")
    parser.add_argument("--noise-px", type=non_negative_float, default=1.0)

    parser = _parser(subparsers, "ortho-limit", "perspective against orthographic landmarks by distance",
                     ortho_limit)
    parser.add_argument("--distances", type=positive_distances, default=[0.3, 0.6, 1.2, 2.5, 5.0, 1e6])

    parser = _parser(subparsers, "distance-bias", "estimated against true subject-camera distance", distance_bias)
    parser.add_argument("--distances", type=positive_distances, default=[0.3, 0.6, 1.2, 2.4])
