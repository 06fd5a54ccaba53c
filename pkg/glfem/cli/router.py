from glfem.cli.commands import bestapprox, converge, eigs, lod, minimize
from glfem.cli.routing import CommandRouter

command_router = CommandRouter()

# Single-mesh runs
command_router.include_router(minimize.router)
command_router.include_router(eigs.router)

# Studies against a reference solution
command_router.include_router(converge.router)
command_router.include_router(bestapprox.router)
command_router.include_router(lod.router)
