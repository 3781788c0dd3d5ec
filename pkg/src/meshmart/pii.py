"""Rule-based PII scanning over column metadata and sampled values.

Rules are a version-controlled JSON list (name patterns against sanitized
column/path names, value patterns against sampled string values); every
finding records the ruleset version and hash it was produced under.
Statistical NER is out of scope: person_name and postal_address detection
is name-pattern-only and capped at medium confidence.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading

from .core import Catalog, Principal, SYS_PREFIX
from .errors import AccessDenied, NoSuchTable, NotFlagged
from .inference import infer_schema, sanitize_key
from .util import dumps_canonical, now_rfc3339

FINDING_PREFIX = f"{SYS_PREFIX}pii/"

DEFAULT_RULES = [
    {"id": "email_name", "kind": "name_pattern", "pii_class": "email",
     "pattern": r"(^|_)e?mail(_|$)"},
    {"id": "email_value", "kind": "value_pattern", "pii_class": "email",
     "pattern": r"^[A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}$"},
    {"id": "phone_name", "kind": "name_pattern", "pii_class": "phone",
     "pattern": r"(^|_)(phone|mobile|msisdn|cell)(_|$)"},
    {"id": "phone_value", "kind": "value_pattern", "pii_class": "phone",
     "pattern": r"^\+?[0-9][0-9 ()\-]{5,18}[0-9]$"},
    {"id": "person_name_name", "kind": "name_pattern", "pii_class": "person_name",
     "pattern": r"(^|_)(first_name|last_name|full_name|surname|given_name|person_name)(_|$)"},
    {"id": "postal_name", "kind": "name_pattern", "pii_class": "postal_address",
     "pattern": r"(^|_)(street|postal_code|zipcode|postcode|mailing_address|postal_address|home_address|shipping_address)(_|$)"},
    {"id": "ip_name", "kind": "name_pattern", "pii_class": "ip_address",
     "pattern": r"(^|_)(ip|ip_address|ip_addr)(_|$)"},
    {"id": "ip_value", "kind": "value_pattern", "pii_class": "ip_address",
     "pattern": r"^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$"},
    {"id": "national_id_name", "kind": "name_pattern", "pii_class": "national_id",
     "pattern": r"(^|_)(ssn|national_id|tax_id|nid)(_|$)"},
    {"id": "national_id_value", "kind": "value_pattern", "pii_class": "national_id",
     "pattern": r"^\d{3}-\d{2}-\d{4}$"},
]

DEFAULT_RULESET = {"version": 1, "rules": DEFAULT_RULES}


def ruleset_hash(ruleset: dict) -> str:
    return hashlib.sha256(dumps_canonical(ruleset).encode("utf-8")).hexdigest()[:16]


def load_ruleset(path: str | None) -> dict:
    if not path:
        return DEFAULT_RULESET
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "rules" not in doc or "version" not in doc:
        raise ValueError("ruleset file needs {version, rules}")
    return doc


class PiiScanner:
    def __init__(
        self,
        catalog: Catalog,
        table_store,
        access,
        ruleset: dict | None = None,
        value_fraction_threshold: float = 0.3,
        sample_n: int = 1000,
        sample_seed: int = 20260101,
    ):
        self.catalog = catalog
        self.table_store = table_store
        self.access = access
        self.ruleset = ruleset or DEFAULT_RULESET
        self.tau = value_fraction_threshold
        self.sample_n = sample_n
        self.sample_seed = sample_seed
        self._lock = threading.RLock()
        self._compiled_name = []
        self._compiled_value = []
        for rule in self.ruleset["rules"]:
            compiled = re.compile(rule["pattern"])
            if rule["kind"] == "name_pattern":
                self._compiled_name.append((rule, compiled))
            else:
                self._compiled_value.append((rule, compiled))

    # -- sampling ------------------------------------------------------------------

    def _sample_rows(self, table, sample_n: int) -> list[tuple]:
        """First block plus uniform random blocks, reproducible via fixed seed."""
        blocks = table._snapshot_blocks()
        if not blocks:
            return []
        rng = random.Random(self.sample_seed)
        ordered = [blocks[0]]
        rest = blocks[1:]
        rng.shuffle(rest)
        ordered.extend(rest)
        out: list[tuple] = []
        for block in ordered:
            if len(out) >= sample_n:
                break
            out.extend(block.rows[: sample_n - len(out)])
        return out

    # -- scanning ---------------------------------------------------------------------

    def scan_table(self, qualified: str, sample_n: int | None = None) -> list[dict]:
        sample_n = sample_n or self.sample_n
        table = self.table_store.get(qualified)  # NoSuchTable surfaces here
        rows = self._sample_rows(table, sample_n)
        version = self.ruleset["version"]
        rhash = ruleset_hash(self.ruleset)

        # candidate paths: declared scalar columns + inferred payload leaf paths
        candidates: list[tuple[str, str, list]] = []  # (path, sanitized_name, values)
        col_index = {c.name: i for i, c in enumerate(table.columns)}
        for column in table.columns:
            idx = col_index[column.name]
            if column.type == "VARIANT":
                docs = [r[idx] for r in rows if isinstance(r[idx], dict)]
                if not docs:
                    continue
                schema = infer_schema(docs)
                for path, descriptor in schema.fields.items():
                    if descriptor.type.kind not in ("STRING", "INT", "FLOAT", "BOOL", "NULL", "VARIANT"):
                        continue
                    if any(not isinstance(seg, str) for seg in path):
                        continue  # array element paths are not directly addressable
                    dotted = ".".join(path)
                    values = [_dig(r[idx], path) for r in rows]
                    name = "__".join(sanitize_key(seg) for seg in path)
                    candidates.append((f"{column.name}.{dotted}", name, values))
            else:
                values = [r[idx] for r in rows]
                candidates.append((column.name, sanitize_key(column.name), values))

        findings = []
        for path, name, values in candidates:
            non_null = [v for v in values if v is not None]
            sample_size = len(non_null)
            hits_by_class: dict[str, dict] = {}
            for rule, compiled in self._compiled_name:
                if compiled.search(name):
                    hits_by_class.setdefault(rule["pii_class"], {"name": False, "frac": 0.0})
                    hits_by_class[rule["pii_class"]]["name"] = True
            if sample_size:
                for rule, compiled in self._compiled_value:
                    matched = sum(
                        1 for v in non_null if isinstance(v, str) and compiled.search(v)
                    )
                    fraction = matched / sample_size
                    if fraction > 0:
                        entry = hits_by_class.setdefault(
                            rule["pii_class"], {"name": False, "frac": 0.0}
                        )
                        entry["frac"] = max(entry["frac"], fraction)
            for pii_class, hit in sorted(hits_by_class.items()):
                name_hit = hit["name"]
                fraction = hit["frac"]
                if not (name_hit or fraction >= self.tau):
                    continue
                if self._suppressed(qualified, path, pii_class, version):
                    continue
                confidence = "high" if (name_hit and fraction >= self.tau) else "medium"
                finding = self._persist_finding(
                    qualified, path, pii_class, name_hit, fraction, sample_size,
                    confidence, version, rhash,
                )
                findings.append(finding)
        return findings

    def _suppressed(self, table: str, path: str, pii_class: str, version) -> bool:
        for doc in self.list_findings():
            if (
                doc["table"] == table
                and doc["path"] == path
                and doc["pii_class"] == pii_class
                and doc["ruleset_version"] == version
                and doc["state"] == "dismissed"
            ):
                return True
        return False

    def _persist_finding(self, table, path, pii_class, name_hit, fraction, sample_size,
                         confidence, version, rhash) -> dict:
        with self._lock:
            # refresh an existing flagged finding for the same key in place
            for doc in self.list_findings():
                if (
                    doc["table"] == table
                    and doc["path"] == path
                    and doc["pii_class"] == pii_class
                    and doc["ruleset_version"] == version
                    and doc["state"] == "flagged"
                ):
                    doc.update(
                        name_hit=name_hit,
                        value_hit_fraction=round(fraction, 6),
                        sample_size=sample_size,
                        confidence=confidence,
                        scanned_at=now_rfc3339(),
                    )
                    self.catalog.store.put(FINDING_PREFIX + doc["id"], doc)
                    return doc
            seq = len(self.catalog.store.keys(FINDING_PREFIX)) + 1
            doc = {
                "id": f"pii{seq:06d}",
                "table": table,
                "path": path,
                "pii_class": pii_class,
                "name_hit": name_hit,
                "value_hit_fraction": round(fraction, 6),
                "sample_size": sample_size,
                "confidence": confidence,
                "state": "flagged",
                "ruleset_version": version,
                "ruleset_hash": rhash,
                "scanned_at": now_rfc3339(),
            }
            self.catalog.store.put(FINDING_PREFIX + doc["id"], doc)
            return doc

    # -- findings --------------------------------------------------------------------------

    def list_findings(self, tenant: str | None = None, state: str | None = None) -> list[dict]:
        out = []
        for rec in self.catalog.store.items(FINDING_PREFIX):
            doc = dict(rec.body)
            if tenant is not None and doc["table"].split(".")[0] != tenant:
                continue
            if state is not None and doc["state"] != state:
                continue
            out.append(doc)
        out.sort(key=lambda d: d["id"])
        return out

    def get_finding(self, finding_id: str) -> dict:
        rec = self.catalog.store.get(FINDING_PREFIX + finding_id)
        if rec is None:
            raise NotFlagged(f"no such finding: {finding_id}")
        return dict(rec.body)

    def resolve_finding(self, finding_id: str, state: str, principal: Principal) -> dict:
        if state not in ("confirmed", "dismissed"):
            raise NotFlagged(f"state must be confirmed or dismissed, got {state!r}")
        with self._lock:
            doc = self.get_finding(finding_id)
            if doc["state"] != "flagged":
                raise NotFlagged(f"finding {finding_id} is {doc['state']}")
            if not self.access.check_access(principal, doc["table"], "MANAGE"):
                raise AccessDenied(f"{principal.ref()} does not manage {doc['table']}")
            doc["state"] = state
            doc["resolved_by"] = principal.ref()
            doc["resolved_at"] = now_rfc3339()
            self.catalog.store.put(FINDING_PREFIX + finding_id, doc)
            return doc


def _dig(doc, path: tuple):
    cur = doc
    for seg in path:
        if not isinstance(cur, dict):
            return None
        cur = cur.get(seg)
    return cur
