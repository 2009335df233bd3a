/**
 * The probe program itself, generated verbatim into the target environment.
 *
 * It must stay a single file with zero third-party imports so dropping it
 * into an environment cannot perturb what is being measured.  For each
 * dotted name it imports the longest importable module prefix, then
 * traverses the remaining segments as attributes; a name counts as
 * importable only when the full traversal succeeds.  One name's failure
 * never aborts the run.
 *
 * Invocation: `<interpreter> probe.py <request.json>`; the request carries
 * `names` and `output_path`, the result document lands at `output_path`.
 */
export const PROBE_SOURCE: string = `\
import importlib
import json
import sys


def first_line(exc):
    text = "%s: %s" % (type(exc).__name__, exc)
    for line in text.splitlines():
        if line.strip():
            return line
    return type(exc).__name__


def probe_name(name):
    parts = name.split(".")
    module = None
    consumed = 0
    not_a_module = None
    for i in range(1, len(parts) + 1):
        prefix = ".".join(parts[:i])
        try:
            module = importlib.import_module(prefix)
            consumed = i
        except ModuleNotFoundError as exc:
            if getattr(exc, "name", None) == prefix:
                # the prefix simply is not a module; switch to attributes
                not_a_module = exc
                break
            # a module on the prefix's chain broke while executing, for
            # example because one of its own dependencies is missing
            return {
                "name": name,
                "importable": False,
                "failed_at": parts[i - 1],
                "reason": first_line(exc),
            }
        except BaseException as exc:
            return {
                "name": name,
                "importable": False,
                "failed_at": parts[i - 1],
                "reason": first_line(exc),
            }
    if module is None:
        return {
            "name": name,
            "importable": False,
            "failed_at": parts[0],
            "reason": first_line(not_a_module) if not_a_module else "not importable",
        }
    obj = module
    for segment in parts[consumed:]:
        try:
            obj = getattr(obj, segment)
        except BaseException as exc:
            return {
                "name": name,
                "importable": False,
                "failed_at": segment,
                "reason": first_line(exc),
            }
    return {"name": name, "importable": True}


def fingerprint():
    distributions = []
    try:
        import importlib.metadata as metadata

        for dist in metadata.distributions():
            try:
                name = dist.metadata["Name"]
                if name:
                    distributions.append("%s==%s" % (name, dist.version))
            except Exception:
                continue
    except Exception:
        pass
    return {
        "python": sys.version.split()[0],
        "distributions": sorted(set(distributions))[:200],
    }


def main(argv):
    if len(argv) != 2:
        sys.stderr.write("usage: probe.py <request.json>\\n")
        return 2
    try:
        with open(argv[1], "r") as handle:
            request = json.load(handle)
    except (IOError, OSError, ValueError) as exc:
        sys.stderr.write("unreadable request: %s\\n" % exc)
        return 2
    names = request.get("names") or []
    output_path = request.get("output_path")
    if not names or not output_path:
        sys.stderr.write("request needs non-empty names and an output_path\\n")
        return 2
    short = [n for n in names if len(n.split(".")) < 2]
    if short:
        sys.stderr.write("names need >= 2 segments: %s\\n" % ", ".join(short[:5]))
        return 2
    payload = {
        "results": [probe_name(name) for name in names],
        "interpreter_fingerprint": fingerprint(),
    }
    try:
        with open(output_path, "w") as handle:
            json.dump(payload, handle, indent=1, sort_keys=True)
            handle.write("\\n")
    except (IOError, OSError) as exc:
        sys.stderr.write("output unwritable: %s\\n" % exc)
        return 3
    sys.stdout.write("probed %d name(s)\\n" % len(names))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
`;
