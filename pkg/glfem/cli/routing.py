from typing import Callable, Dict

from glfem.core.exceptions import ConfigError
from glfem.schemas.run import CommandOutcome, RunConfig

Handler = Callable[[RunConfig], CommandOutcome]


class CommandRouter:
    """Maps command names to handlers; routers can be merged like sub-routers."""

    def __init__(self):
        self.handlers: Dict[str, Handler] = {}

    def command(self, name: str) -> Callable[[Handler], Handler]:
        def register(handler: Handler) -> Handler:
            if name in self.handlers:
                raise ValueError(f"Command {name!r} registered twice")
            self.handlers[name] = handler
            return handler

        return register

    def include_router(self, other: "CommandRouter") -> None:
        for name, handler in other.handlers.items():
            self.command(name)(handler)

    def dispatch(self, config: RunConfig) -> CommandOutcome:
        handler = self.handlers.get(config.command)
        if handler is None:
            raise ConfigError("command", f"no handler for {config.command!r}")
        return handler(config)
