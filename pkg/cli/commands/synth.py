from cli.common import (CommandContext, add_seed, image_size, non_negative_float, pair, positive_float, positive_int,
                        triple)
from core.fitting.landmarks import CAMERA_KINDS
from core.services.synthesis_service import SynthesisService
from utils.errors import EXIT_OK

def synth(args, ctx: CommandContext) -> int:
    service = ctx.service(SynthesisService)
    service.synthesize_model(args.seed, args.n_vertices, args.n_modes, args.scale, args.n_landmarks, args.out)
    return EXIT_OK

def project(args, ctx: CommandContext) -> int:
    service = ctx.service(SynthesisService)
    model = service.load_model(args.model)
    alpha = service.load_alpha(model, args.alpha)
    camera = service.camera(model, alpha, args.camera, args.rotation, args.distance, args.focal, args.scale,
                            args.principal_point, args.image_size)
    landmarks = service.project(model, alpha, camera, args.noise_px, args.seed)
    service.save_landmarks(landmarks, args.out)
    return EXIT_OK

def register(subparsers):
    parser = subparsers.add_parser("synth", help="write a synthetic face-like shape model")
    add_seed(parser)
    parser.add_argument("--n-vertices", type=positive_int, default=400)
    parser.add_argument("--n-modes", type=positive_int, default=10)
    parser.add_argument("--n-landmarks", type=int, default=20, help="canonical landmarks, eyes first")
    parser.add_argument("--scale", type=positive_float, default=0.16, help="face diameter (m)")
    parser.add_argument("--out", required=True, help="SMM1 model file")
    parser.set_defaults(handler=synth)

    parser = subparsers.add_parser("project", help="project model landmarks into an image")
    add_seed(parser)
    parser.add_argument("--model", required=True)
    parser.add_argument("--alpha", default=None, help="one-column CSV of shape coefficients (default: mean)")
    parser.add_argument("--camera", choices=CAMERA_KINDS, required=True)
    parser.add_argument("--rotation", type=triple, default=(0.0, 0.0, 0.0), metavar="RX,RY,RZ",
                        help="axis-angle rotation in degrees")
    parser.add_argument("--distance", type=positive_float, default=None, help="subject-camera distance (m)")
    parser.add_argument("--focal", type=positive_float, default=None,
                        help="focal length (px); default puts the eyes 200 px apart")
    parser.add_argument("--scale", type=positive_float, default=None,
                        help="orthographic scale (px/m); default puts the eyes 200 px apart")
    parser.add_argument("--principal-point", type=pair, default=None, metavar="CX,CY",
                        help="default: image centre when --image-size is given, else the origin")
    parser.add_argument("--image-size", type=image_size, default=None, metavar="W,H")
    parser.add_argument("--noise-px", type=non_negative_float, default=0.0)
    parser.add_argument("--out", required=True, help="landmark CSV")
    parser.set_defaults(handler=project)
