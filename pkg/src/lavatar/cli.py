"""Operator command line: bake, render, compare, stream and inspect assets.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, bench, codec, configs, oracle, protocol, raster, stream
from .baker import bake_asset
from .errors import LavatarError
from .imgio import (
    psnr,
    read_png,
    write_png,
    write_raw,
    write_transmittance,
)
from .scenes import BakeConfig
from .types import Camera

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


@click.group()
@click.version_option(__version__)
def cli():
    """Layered-mesh avatar toolkit."""


def _load_asset(path: str):
    return codec.decode_asset(Path(path).read_bytes())


def _load_frames(params_path: str, p: int):
    return configs.load_params_csv(params_path, expected_p=p)


def _parse_rgb(text: str) -> tuple[float, float, float]:
    vals = tuple(float(x) for x in text.split(","))
    if len(vals) != 3:
        raise click.UsageError("background must be r,g,b")
    return vals


@cli.command()
@click.argument("scene_cfg", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--grid", default=512, show_default=True, help="Lattice resolution per layer.")
@click.option("--tex", default=512, show_default=True, help="Texture map resolution.")
@click.option("--warp-res", default=None, type=int, help="Warp map resolution (default: tex).")
@click.option("--specular", is_flag=True, help="Bake the spherical-harmonics specular maps.")
@click.option("--deflate", is_flag=True, help="Compress container chunks losslessly.")
def bake(scene_cfg, output, grid, tex, warp_res, specular, deflate):
    """Bake SCENE_CFG into a .lava asset."""
    scene = configs.load_scene_config(scene_cfg)
    config = BakeConfig(grid_res=grid, tex_res=tex, warp_res=warp_res, include_specular=specular)
    asset = bake_asset(scene, config)
    blob = codec.encode_asset(asset, deflate=deflate)
    Path(output).write_bytes(blob)
    click.echo(f"baked {output}: {len(blob)} bytes, N={asset.meta.num_layers} "
               f"W={asset.meta.num_warps} T={asset.meta.num_textures} p={asset.meta.p}")


@cli.command()
@click.argument("asset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--params", "params_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--camera", "camera_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--outdir", required=True, type=click.Path(file_okay=False))
@click.option("--mode", type=click.Choice(["prebaked", "fused"]), default="prebaked", show_default=True)
@click.option("--background", default="0,0,0", show_default=True)
@click.option("--raw", is_flag=True, help="Also dump raw framebuffers for golden tests.")
def render(asset_path, params_path, camera_path, outdir, mode, background, raw):
    """Render every frame of a params CSV with the software rasterizer."""
    asset = _load_asset(asset_path)
    frames = _load_frames(params_path, asset.meta.p)
    camera = configs.load_camera_config(camera_path)
    options = raster.RenderOptions(mode=mode, background=_parse_rgb(background))
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for i, params in enumerate(frames):
        result = raster.render(asset, params, camera, options)
        write_png(out / f"frame_{i:04d}.png", result.image)
        if raw:
            write_raw(out / f"frame_{i:04d}.raw", result.image)
    click.echo(f"rendered {len(frames)} frame(s) to {outdir}")


@cli.command("oracle-render")
@click.argument("scene_cfg", type=click.Path(exists=True, dir_okay=False))
@click.option("--params", "params_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--camera", "camera_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--outdir", required=True, type=click.Path(file_okay=False))
@click.option("--background", default="0,0,0", show_default=True)
@click.option("--transmittance", "dump_trans", is_flag=True, help="Write 32-bit transmittance sidecars.")
def oracle_render_cmd(scene_cfg, params_path, camera_path, outdir, background, dump_trans):
    """Ray-trace the analytic scene directly (ground truth, slow)."""
    scene = configs.load_scene_config(scene_cfg)
    frames = _load_frames(params_path, scene.p)
    camera = configs.load_camera_config(camera_path)
    bg = _parse_rgb(background)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for i, params in enumerate(frames):
        img = oracle.oracle_render(scene, params, camera)
        write_png(out / f"frame_{i:04d}.png", img.to_srgb8(bg))
        if dump_trans:
            write_transmittance(out / f"frame_{i:04d}.trans", img.transmittance)
    click.echo(f"oracle-rendered {len(frames)} frame(s) to {outdir}")


@cli.command()
@click.argument("dir_a", type=click.Path(exists=True, file_okay=False))
@click.argument("dir_b", type=click.Path(exists=True, file_okay=False))
@click.option("--metric", type=click.Choice(["psnr"]), default="psnr", show_default=True)
def compare(dir_a, dir_b, metric):
    """Per-frame PSNR between matching PNG files of two directories."""
    del metric
    names_a = sorted(p.name for p in Path(dir_a).glob("*.png"))
    names_b = sorted(p.name for p in Path(dir_b).glob("*.png"))
    common = [n for n in names_a if n in set(names_b)]
    if not common:
        raise click.UsageError("no matching PNG files to compare")
    values = []
    for name in common:
        value = psnr(read_png(Path(dir_a) / name), read_png(Path(dir_b) / name))
        values.append(value)
        click.echo(f"{name}  psnr={'inf' if math.isinf(value) else f'{value:.2f}'} dB")
    finite = [v for v in values if not math.isinf(v)]
    mean = math.inf if not finite else float(np.mean(finite))
    click.echo(f"mean  psnr={'inf' if math.isinf(mean) else f'{mean:.2f}'} dB over {len(common)} frame(s)")


@cli.command()
@click.argument("asset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--params", "params_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["client", "server"]), default="client", show_default=True)
@click.option("--listen", default="127.0.0.1:0", show_default=True, metavar="HOST:PORT")
@click.option("--sessions", default=1, show_default=True, help="Number of sessions to serve before exiting.")
@click.option("--texframe-codec", type=click.Choice(["raw", "deflate"]), default="raw", show_default=True)
def serve(asset_path, params_path, mode, listen, sessions, texframe_codec):
    """Stream an asset plus per-frame parameters over TCP."""
    blob = Path(asset_path).read_bytes()
    asset = codec.decode_asset(blob)
    frames = _load_frames(params_path, asset.meta.p)
    host, _, port = listen.rpartition(":")
    proto_mode = protocol.MODE_CLIENT_BLEND if mode == "client" else protocol.MODE_SERVER_BLEND
    tf_codec = protocol.CODEC_RAW if texframe_codec == "raw" else protocol.CODEC_DEFLATE

    def on_listen(addr):
        click.echo(f"listening on {addr[0]}:{addr[1]} mode={mode} frames={len(frames)}")

    stats = stream.serve(
        asset,
        blob,
        frames,
        mode=proto_mode,
        host=host or "127.0.0.1",
        port=int(port),
        sessions=sessions,
        texframe_codec=tf_codec,
        on_listen=on_listen,
    )
    for i, st in enumerate(stats):
        click.echo(
            f"session {i}: sent={st.bytes_sent} bytes, frames={st.frames}, "
            f"mean frame payload={st.mean_frame_payload:.1f} bytes, asset sent once={st.asset_chunks > 0}"
        )


@cli.command()
@click.option("--connect", required=True, metavar="HOST:PORT")
@click.option("--camera", "camera_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--outdir", required=True, type=click.Path(file_okay=False))
@click.option("--mode", type=click.Choice(["client", "server"]), default="client", show_default=True)
@click.option("--render-mode", type=click.Choice(["prebaked", "fused"]), default="prebaked", show_default=True)
def play(connect, camera_path, outdir, mode, render_mode):
    """Join a streaming session and write the rendered frames."""
    host, _, port = connect.rpartition(":")
    camera = configs.load_camera_config(camera_path)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)

    def sink(index, image):
        write_png(out / f"frame_{index:04d}.png", image)

    result = stream.client_session(
        (host or "127.0.0.1", int(port)),
        camera,
        options=raster.RenderOptions(mode=render_mode),
        mode=protocol.MODE_CLIENT_BLEND if mode == "client" else protocol.MODE_SERVER_BLEND,
        frame_sink=sink,
        keep_images=False,
    )
    click.echo(
        f"played {result.stats.frames} frame(s), received {result.stats.bytes_received} bytes "
        f"({result.stats.asset_bytes} asset bytes in {result.stats.asset_chunks} chunks)"
    )


@cli.command("bench")
@click.argument("asset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--sizes", default="256,512", show_default=True, help="Render resolutions.")
@click.option("--mesh", default="32,128", show_default=True, help="Mesh lattice resolutions.")
@click.option("--frames", default=5, show_default=True)
def bench_cmd(asset_path, sizes, mesh, frames):
    """Measure rasterizer frame rates over mesh/render resolutions."""
    asset = _load_asset(asset_path)
    size_list = [int(s) for s in sizes.split(",")]
    mesh_list = [int(m) for m in mesh.split(",")]
    rows = bench.run_benchmark(asset, size_list, mesh_list, frames=frames)
    click.echo(bench.format_table(rows))


@cli.command()
@click.argument("asset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def inspect(asset_path, as_json):
    """Print container metadata and chunk sizes."""
    info = codec.inspect_container(Path(asset_path).read_bytes())
    if as_json:
        click.echo(json.dumps(info, indent=2))
        return
    click.echo(
        f"N={info['N']} W={info['W']} T={info['T']} p={info['p']} "
        f"grid={info['grid_res'][0]}x{info['grid_res'][1]} tex={info['tex_res']} warp={info['warp_res']}"
    )
    click.echo(
        f"version={info['version']} specular={info['has_specular']} deflate={info['deflate']} "
        f"center=({', '.join(f'{c:.4g}' for c in info['scene_center'])})"
    )
    for name, size in sorted(info["chunks"].items()):
        click.echo(f"  {name}: {size} bytes")
    click.echo(f"file size: {info['file_size']} bytes")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--asset", "assets", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Preload .lava files into the asset store.")
@click.option("--params", "params_path", type=click.Path(exists=True, dir_okay=False),
              help="Params CSV registered for every preloaded asset.")
def service(host, port, assets, params_path):
    """Run the HTTP/WebSocket service wrapping this toolkit."""
    import uvicorn

    from .service.app import create_app

    app = create_app()
    store = app.state.store
    for path in assets:
        blob = Path(path).read_bytes()
        asset_id = Path(path).stem
        store.put(asset_id, codec.decode_asset(blob), blob)
        if params_path:
            asset = store.get(asset_id).asset
            store.set_frames(asset_id, configs.load_params_csv(params_path, expected_p=asset.meta.p))
        click.echo(f"loaded asset {asset_id!r} from {path}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except (LavatarError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
