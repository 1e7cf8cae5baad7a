"""INI run files for ``CaseSpec``.

Sections and keys::

    [case]     case, method, p, ladder (comma separated), levels, reference
    [solver]   tol_residual, max_iter, load_steps, line_search
    [trace]    rho
    [options]  free-form case options (values parsed as float when possible)
    [output]   out, vtk, residual, record_time
"""

import configparser

from .harness import CaseSpec

_FIELDS = {
    "case": {"case": str, "method": str, "p": int, "ladder": "ladder", "levels": int, "reference": float},
    "solver": {"tol_residual": float, "max_iter": int, "load_steps": int, "line_search": bool},
    "trace": {"rho": float},
    "output": {"out": str, "vtk": bool, "residual": bool, "record_time": bool},
}


def _parse_value(text):
    try:
        return float(text)
    except ValueError:
        return text


def read_config(path):
    """Read a run file into a flat dict of ``CaseSpec`` keyword arguments."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    unknown = set(cp.sections()) - set(_FIELDS) - {"options"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    values = {}
    for section, fields in _FIELDS.items():
        if not cp.has_section(section):
            continue
        for key in cp[section]:
            if key not in fields:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            kind = fields[key]
            if kind is bool:
                values[key] = cp[section].getboolean(key)
            elif kind == "ladder":
                values[key] = tuple(int(v) for v in cp[section][key].split(","))
            else:
                values[key] = kind(cp[section][key])
    if cp.has_section("options"):
        values["options"] = {k: _parse_value(v) for k, v in cp["options"].items()}
    return values


def load_spec(path, **overrides):
    """``CaseSpec`` from a run file; keyword arguments that are not ``None`` take precedence."""
    values = read_config(path)
    for key, val in overrides.items():
        if val is None:
            continue
        if key == "options":
            values["options"] = {**values.get("options", {}), **val}
        else:
            values[key] = val
    return CaseSpec(**values)


def dump_spec(spec, path):
    """Write ``spec`` as a run file that ``load_spec`` reads back to an equal spec."""
    cp = configparser.ConfigParser()
    for section, fields in _FIELDS.items():
        entries = {}
        for key, kind in fields.items():
            val = getattr(spec, key)
            if val is None or key == "levels":
                continue
            entries[key] = ",".join(map(str, val)) if kind == "ladder" else (repr(val) if kind is float else str(val))
        if entries:
            cp[section] = entries
    if spec.options:
        cp["options"] = {k: str(v) for k, v in spec.options.items()}
    with open(path, "w") as fh:
        cp.write(fh)
