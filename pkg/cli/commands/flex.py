from cli.common import CommandContext, positive_float
from core.services.flexibility_service import FlexibilityService
from utils.errors import EXIT_OK

def flex_modes(args, ctx: CommandContext) -> int:
    service = ctx.service(FlexibilityService)
    model = service.load_model(args.model)
    report = service.load_report(args.fit)
    spectrum = service.spectrum(model, report, args.k1, args.k2, args.n_sigmas)
    service.save_spectrum(spectrum, args.out)
    if args.mesh_dir:
        service.save_snapshots(model, report.alpha, spectrum, args.mesh_dir)
    return EXIT_OK

def register(subparsers):
    parser = subparsers.add_parser("flex-modes", help="flexibility modes of a saved fit")
    parser.add_argument("--model", required=True)
    parser.add_argument("--fit", required=True, help="JSON fit report")
    parser.add_argument("--k1", type=positive_float, default=0.002, help="mean surface change per mode (m)")
    parser.add_argument("--k2", type=positive_float, default=2.0, help="landmark shift threshold (px)")
    parser.add_argument("--n-sigmas", type=positive_float, default=3.0, help="plausibility bound")
    parser.add_argument("--out", required=True, help="spectrum CSV")
    parser.add_argument("--mesh-dir", default=None, help="write OBJ snapshots of the retained modes")
    parser.set_defaults(handler=flex_modes)
