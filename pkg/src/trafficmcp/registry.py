"""Tool registry with on-demand sub-module import.

A fresh registry knows every tool's descriptor (from the static
catalogue) but holds no implementation code: ``trafficmcp.tools.<name>``
is imported only when a client calls ``import_module``. Until then,
calling one of the module's tools fails with a structured, retryable
"not imported" error instead of executing anything.
"""

from __future__ import annotations

import importlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import catalogue
from .catalogue import BASE_MODULE, BASE_TOOLS, MODULES, ToolDescriptor
from .errors import (
    INVALID_PARAMS,
    METHOD_NOT_FOUND,
    TOOL_FAILED,
    TOOL_NOT_IMPORTED,
    UNKNOWN_MODULE,
    ToolError,
)

_TYPE_CHECKS = {
    "string": lambda v: isinstance(v, str),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "array": lambda v: isinstance(v, list),
    "object": lambda v: isinstance(v, dict),
}


@dataclass
class ToolContext:
    """Runtime services handed to tool handlers."""

    workspace: Path
    osm_transport: object | None = None
    registry: "Registry | None" = None

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.workspace / p

    def out_path(self, path: str) -> Path:
        p = self.resolve(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def display(self, path: Path) -> str:
        try:
            return str(path.relative_to(self.workspace))
        except ValueError:
            return str(path)


class Registry:
    """Catalogue state plus dispatch for base and imported tools."""

    def __init__(self, workspace: str | Path | None = None,
                 osm_transport=None,
                 load_hook: Callable[[str], None] | None = None):
        workspace = Path(workspace or os.environ.get("TRAFFICMCP_WORKSPACE",
                                                     "trafficmcp_workspace"))
        self.ctx = ToolContext(workspace=workspace, osm_transport=osm_transport,
                               registry=self)
        self.load_hook = load_hook
        self._index = catalogue.tool_index()
        self._handlers: dict[str, Callable] = {}
        self._imported: set[str] = set()

    # -- discovery ---------------------------------------------------------

    def catalogue_snapshot(self) -> dict:
        entries = {}
        for name in sorted(MODULES):
            spec = MODULES[name]
            entries[name] = {
                "description": spec.description,
                "status": "imported" if name in self._imported else "available",
                "tool_names": [t.name for t in spec.tools],
            }
        return {"modules": entries,
                "base_tools": [t.name for t in BASE_TOOLS]}

    def list_tools(self) -> list[ToolDescriptor]:
        tools = list(BASE_TOOLS)
        for name in sorted(self._imported):
            tools.extend(MODULES[name].tools)
        return tools

    # -- import ------------------------------------------------------------

    def import_modules(self, names: list[str]) -> dict:
        if not isinstance(names, list) or not names:
            raise ToolError("names must be a non-empty list of module names",
                            code=INVALID_PARAMS, param="names",
                            tool="import_module")
        imported, already, added = [], [], []
        for name in names:
            if name not in MODULES:
                raise ToolError(f"unknown module {name!r}", code=UNKNOWN_MODULE,
                                module=name)
            if name in self._imported:
                already.append(name)
                continue
            self._load(name)
            imported.append(name)
            added.extend(t.to_dict() for t in MODULES[name].tools)
        return {"imported": imported, "already": already, "tools_added": added}

    def _load(self, name: str) -> None:
        module = importlib.import_module(f"trafficmcp.tools.{name}")
        handlers = getattr(module, "HANDLERS", None)
        if handlers is None:
            raise ToolError(f"tool module {name} exposes no handlers",
                            module=name)
        for tool in MODULES[name].tools:
            if tool.name not in handlers:
                raise ToolError(f"tool module {name} missing handler {tool.name}",
                                module=name)
            self._handlers[tool.name] = handlers[tool.name]
        self._imported.add(name)
        if self.load_hook is not None:
            self.load_hook(name)

    @property
    def imported_modules(self) -> set[str]:
        return set(self._imported)

    # -- dispatch ----------------------------------------------------------

    def _validate_args(self, tool: ToolDescriptor, args: dict) -> None:
        if not isinstance(args, dict):
            raise ToolError("arguments must be an object", code=INVALID_PARAMS,
                            tool=tool.name)
        known = {p.name: p for p in tool.parameters}
        for key in args:
            if key not in known:
                raise ToolError(f"unexpected parameter {key!r}",
                                code=INVALID_PARAMS, tool=tool.name, param=key)
        for p in tool.parameters:
            if p.name not in args:
                if p.required:
                    raise ToolError(f"missing required parameter {p.name!r}",
                                    code=INVALID_PARAMS, tool=tool.name,
                                    param=p.name)
                continue
            if not _TYPE_CHECKS[p.type](args[p.name]):
                raise ToolError(
                    f"parameter {p.name!r} must be of type {p.type}",
                    code=INVALID_PARAMS, tool=tool.name, param=p.name)

    def call_tool(self, name: str, args: dict | None = None) -> dict:
        args = args or {}
        tool = self._index.get(name)
        if tool is None:
            raise ToolError(f"unknown tool {name!r}", code=METHOD_NOT_FOUND,
                            tool=name)
        if tool.module != BASE_MODULE and tool.module not in self._imported:
            raise ToolError(
                f"tool {name!r} belongs to module {tool.module!r}, which is "
                "not imported", code=TOOL_NOT_IMPORTED, tool=name,
                module=tool.module, retryable=True, hint="import_module first")
        self._validate_args(tool, args)
        handler = self._base_handler(name) if tool.module == BASE_MODULE \
            else self._handlers[name]
        try:
            return handler(self.ctx, args)
        except ToolError as err:
            err.data.setdefault("tool", name)
            raise
        except Exception as exc:  # noqa: BLE001 - map to the wire error
            raise ToolError(f"tool {name} failed: {exc}", code=TOOL_FAILED,
                            tool=name, retryable=False) from exc

    def _base_handler(self, name: str) -> Callable:
        if name == "get_module_description":
            return lambda ctx, args: self.catalogue_snapshot()
        if name == "import_module":
            return lambda ctx, args: self.import_modules(args.get("names"))
        if name == "workflow_sim_eval":
            def run_eval(ctx, args):
                from . import workflows  # deferred: keep cold start light

                return workflows.run_sim_eval(ctx, args)
            return run_eval
        if name == "workflow_signal_opt":
            def run_opt(ctx, args):
                from . import workflows

                return workflows.run_signal_opt(ctx, args)
            return run_opt
        raise ToolError(f"unknown base tool {name!r}", code=METHOD_NOT_FOUND)
