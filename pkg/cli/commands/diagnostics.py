from cli.common import CommandContext, add_seed, positive_int
from core.services.experiment_service import ExperimentService
from utils.errors import EXIT_NUMERIC_FAILURE, EXIT_OK

def check_jacobians(args, ctx: CommandContext) -> int:
    service = ctx.service(ExperimentService)
    model = service.load_model(args.model)
    rows, ok = service.check_jacobians(model, args.trials, args.seed)
    if args.out:
        service.save_table("jacobians", rows, args.out)
    return EXIT_OK if ok else EXIT_NUMERIC_FAILURE

def register(subparsers):
    parser = subparsers.add_parser("check-jacobians", help="compare analytic Jacobians with finite differences")
    add_seed(parser)
    parser.add_argument("--model", required=True)
    parser.add_argument("--trials", type=positive_int, default=20)
    parser.add_argument("--out", default=None, help="per-trial error CSV")
    parser.set_defaults(handler=check_jacobians)
