"""Deterministic synthetic log corpora and the insider-access scenario.

The generator simulates users of a bug tracker behind a reverse proxy: each
user action leaves a firewall (iptables) record, one or more web access
records and database query records, interleaved with periodic monitoring
probes.  Field layouts follow common Apache, MySQL general-log and netfilter
formats.
"""

from __future__ import annotations

import enum
import random
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from .errors import DataError
from .recoder import _atomic_write

__all__ = [
    "Complexity",
    "ScenarioSpec",
    "generate",
    "generate_lines",
    "inject_attack",
    "template_names",
    "FAMILIES",
]

FAMILIES = ("web", "firewall", "db")

START = datetime(2014, 9, 30, 0, 0, 0)
SERVER_MAC = "00:50:56:9c:25:67"
GATEWAY_MAC = "00:50:56:9c:5f:1a"
PROXY_IP = "192.168.191.4"
WEB_IP = "169.254.0.2"
DB_IP = "169.254.0.3"
FW_HOST = "v3ls1316.d03.arc.local"
MONITOR_IP = "192.168.191.9"
BROWSER = "Mozilla/5.0 (X11; Ubuntu; Linux x86_64; rv:31.0) Gecko/20100101 Firefox/31.0"

# page -> (response size, queries issued)
LOW_PAGES = {
    "/login_page.php": (3307, ("user_by_name",)),
    "/my_view_page.php": (18210, ("user_prefs", "bug_list")),
    "/view_all_bug_page.php": (26655, ("bug_list", "bug_count")),
}
HIGH_PAGES = {
    **LOW_PAGES,
    "/view.php?id={bug}": (14120, ("bug_by_id", "bugnotes")),
    "/bug_update_page.php?bug_id={bug}": (12093, ("bug_by_id", "user_list")),
    "/bug_report_page.php": (9811, ("project_list",)),
    "/bug_report.php": (302, ("bug_insert", "bug_by_id")),
    "/account_page.php": (7354, ("user_prefs",)),
    "/summary_page.php": (21048, ("bug_count", "project_list")),
    "/changelog_page.php": (6480, ("project_list",)),
    "/search.php?project_id=1&search={term}": (16501, ("bug_search",)),
    "/logout_page.php": (302, ()),
}
ASSETS = ("/css/default.css", "/javascript/common.js", "/images/mantis_logo.png")

QUERIES = {
    "user_by_name": "SELECT id, username, password FROM mantis_user_table WHERE username='{user}'",
    "user_prefs": "SELECT * FROM mantis_user_pref_table WHERE user_id={uid} AND project_id=0",
    "bug_list": "SELECT id FROM mantis_bug_table WHERE project_id=1 ORDER BY last_updated DESC LIMIT 50",
    "bug_count": "SELECT COUNT(*) FROM mantis_bug_table WHERE project_id=1 AND status<80",
    "bug_by_id": "SELECT * FROM mantis_bug_table WHERE id={bug}",
    "bugnotes": "SELECT * FROM mantis_bugnote_table WHERE bug_id={bug} ORDER BY date_submitted",
    "user_list": "SELECT id, username, realname FROM mantis_user_table WHERE enabled=1 ORDER BY username",
    "project_list": "SELECT id, name FROM mantis_project_table WHERE enabled=1 ORDER BY name",
    "bug_insert": "INSERT INTO mantis_bug_table (project_id, reporter_id, summary) VALUES (1, {uid}, 'issue {bug}')",
    "bug_search": "SELECT id FROM mantis_bug_table WHERE summary LIKE '%{term}%' AND project_id=1",
}
# LOW-complexity sessions walk the page list this many times before logging out
SESSION_LOOPS = 10
SEARCH_TERMS = ("crash", "login", "timeout", "export", "layout", "upload")


class Complexity(str, enum.Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class ScenarioSpec:
    """``duration`` is the number of lines to emit."""

    templates: tuple[str, ...] = FAMILIES
    users: int = 1
    duration: int = 1000
    complexity: Complexity = Complexity.LOW
    seed: int = 0

    def __post_init__(self):
        if self.users < 1 or self.duration < 1:
            raise ValueError("users and duration must be positive")
        unknown = set(self.templates) - set(FAMILIES)
        if unknown or not self.templates:
            raise ValueError(f"unknown template families {sorted(unknown)}")


def template_names(spec: ScenarioSpec) -> list[str]:
    """Distinct line templates a scenario can emit."""
    pages = LOW_PAGES if spec.complexity is Complexity.LOW else HIGH_PAGES
    names = []
    if "web" in spec.templates:
        names += [f"web:{p}" for p in pages] + ["web:monitor"]
        if spec.complexity is Complexity.HIGH:
            names += [f"web:{a}" for a in ASSETS]
    if "db" in spec.templates:
        used = sorted({q for _, qs in pages.values() for q in qs})
        names += [f"db:{q}" for q in used] + ["db:connect", "db:quit"]
    if "firewall" in spec.templates:
        names += ["firewall:http", "firewall:mysql"]
    return names


class _User:
    def __init__(self, number: int, rng: random.Random):
        self.name = f"user{number}"
        self.uid = number + 1
        self.ip = f"192.168.191.{20 + number}"
        self.mac = "00:0c:29:%02x:%02x:%02x" % (0x3a, 0x10 + number, rng.randrange(256))
        self.step = 0
        self.remaining = 0
        self.conn = 0


class _Simulator:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.clock = START
        self.uptime = 757325.0
        self.conn = 10
        self.users = [_User(i, self.rng) for i in range(spec.users)]
        self.pages = LOW_PAGES if spec.complexity is Complexity.LOW else HIGH_PAGES
        self.page_list = list(self.pages)
        self.next_probe = START + timedelta(seconds=60)
        # per-host IP id and ephemeral port counters
        self.counters: dict[str, list[int]] = {}

    # field helpers ---------------------------------------------------------

    def _tick(self, lo=0.0, hi=2.0):
        delta = self.rng.uniform(lo, hi)
        self.clock += timedelta(seconds=delta)
        self.uptime += delta

    def _web(self, ip, path, size, agent, status=200):
        ts = self.clock.strftime("%d/%b/%Y:%H:%M:%S")
        return f'{ip} - - [{ts} +0000] "GET {path} HTTP/1.1" {status} {size} "-" "{agent}"'

    def _firewall(self, src_mac, src_ip, dst_ip, dpt):
        rng = self.rng
        ts = self.clock.strftime("%b %d %H:%M:%S")
        ctr = self.counters.setdefault(src_ip, [rng.randrange(1, 65536), rng.randrange(32768, 61000)])
        ctr[0] = (ctr[0] + rng.randrange(1, 40)) % 65536
        ctr[1] = 32768 + (ctr[1] - 32768 + rng.randrange(1, 4)) % (61000 - 32768)
        return (
            f"{ts} {FW_HOST} kernel: [{self.uptime:.6f}] iptables:ACCEPT-INFO IN=eth0 OUT= "
            f"MAC={SERVER_MAC}:{src_mac}:08:00 SRC={src_ip} DST={dst_ip} LEN=60 TOS=0x00 PREC=0x00 "
            f"TTL=64 ID={ctr[0]} DF PROTO=TCP SPT={ctr[1]} "
            f"DPT={dpt} WINDOW=29200 RES=0x00 SYN URGP=0 "
            f"OPT (020405B40402080A1D6066F20000000001030307)"
        )

    def _db(self, conn, kind, text):
        ts = self.clock.strftime("%y%m%d %H:%M:%S")
        return f"{ts}\t{conn:>6} {kind}\t{text}"

    # scenario --------------------------------------------------------------

    def _probe(self):
        lines = []
        if "firewall" in self.spec.templates:
            lines.append(self._firewall(GATEWAY_MAC, MONITOR_IP, WEB_IP, 80))
        if "web" in self.spec.templates:
            lines.append(self._web(PROXY_IP, "/", 5300, "Zabbix monitoring"))
        return lines

    def _page(self, user: _User, page: str):
        rng = self.rng
        fam = self.spec.templates
        size, queries = self.pages[page]
        fields = {"bug": rng.randrange(1, 400), "term": rng.choice(SEARCH_TERMS), "user": user.name,
                  "uid": user.uid}
        lines = []
        if "web" in fam:
            lines.append(self._web(PROXY_IP, page.format(**fields), size, BROWSER,
                                   status=302 if size == 302 else 200))
            if self.spec.complexity is Complexity.HIGH and rng.random() < 0.5:
                for asset in ASSETS:
                    self._tick(0.0, 0.05)
                    lines.append(self._web(PROXY_IP, asset, 1000 + 37 * len(asset), BROWSER))
        if "db" in fam:
            for q in queries:
                lines.append(self._db(user.conn, "Query", QUERIES[q].format(**fields)))
        return lines

    def _action(self, user: _User):
        """Next step of ``user``'s session: log in, view a page, or log out."""
        fam = self.spec.templates
        lines = []
        if user.remaining == 0:
            # new session: one TCP connection to the proxy, one persistent DB connection
            if self.spec.complexity is Complexity.LOW:
                user.remaining = SESSION_LOOPS * len(self.page_list)
            else:
                user.remaining = self.rng.randrange(10, 40)
            user.step = 0
            self.conn += 1
            user.conn = self.conn
            if "firewall" in fam:
                lines.append(self._firewall(user.mac, user.ip, WEB_IP, 80))
            if "db" in fam:
                if "firewall" in fam:
                    lines.append(self._firewall(SERVER_MAC, WEB_IP, DB_IP, 3306))
                lines.append(self._db(user.conn, "Connect", f"mantis@{WEB_IP} on bugtracker"))
        if self.spec.complexity is Complexity.LOW:
            page = self.page_list[user.step % len(self.page_list)]
        else:
            page = self.rng.choice(self.page_list)
        user.step += 1
        user.remaining -= 1
        lines += self._page(user, page)
        if user.remaining == 0 and "db" in fam:
            lines.append(self._db(user.conn, "Quit", ""))
        return lines

    def lines(self):
        produced = 0
        while True:
            self._tick()
            if self.clock >= self.next_probe:
                self.next_probe += timedelta(seconds=60)
                batch = self._probe()
            else:
                batch = self._action(self.rng.choice(self.users))
            for line in batch:
                yield line
                produced += 1
                if produced >= self.spec.duration:
                    return


def generate_lines(spec: ScenarioSpec) -> list[str]:
    return list(_Simulator(spec).lines())


def generate(spec: ScenarioSpec, path) -> Path:
    """Write the generated corpus to ``path``."""
    path = Path(path)
    _atomic_write(path, ("\n".join(generate_lines(spec)) + "\n").encode("ascii"))
    return path


_FW = re.compile(r"iptables:.*MAC=(?P<dst>(?:[0-9a-f]{2}:){5}[0-9a-f]{2}):(?P<src>(?:[0-9a-f]{2}:){5}[0-9a-f]{2})"
                 r":08:00 SRC=(?P<ip>\d+\.\d+\.\d+\.\d+)")
_MAC = re.compile(r"(?:[0-9a-f]{2}:){5}[0-9a-f]{2}")
_IP = re.compile(r"\b\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}\b")


def inject_attack(corpus, seed: int, out=None, targets=None, copies: int = 1) -> tuple[Path, Path, list[int]]:
    """Insert a firewall line with a never-seen source MAC and IP at a random position.

    The line is cloned from a randomly chosen firewall record of ``corpus``;
    ``copies`` identical copies are inserted at independent random positions.
    Returns the output corpus path, the targets path and the target indices.
    """
    corpus = Path(corpus)
    out = Path(out) if out is not None else corpus.with_name(corpus.name + ".injected")
    targets = Path(targets) if targets is not None else out.with_name(out.name + ".targets")
    lines = corpus.read_bytes().decode("latin-1").splitlines()
    firewall = [i for i, ln in enumerate(lines) if _FW.search(ln)]
    if not firewall:
        raise DataError(f"no firewall line in {corpus} to clone")
    rng = random.Random(seed)
    text = "\n".join(lines)
    known_macs = set(_MAC.findall(text))
    known_ips = set(_IP.findall(text))

    template = lines[rng.choice(firewall)]
    m = _FW.search(template)
    while True:
        mac = ":".join("%02x" % rng.randrange(256) for _ in range(6))
        if mac not in known_macs and f"{m.group('dst')}:{mac}" not in text:
            break
    while True:
        ip = "10.%d.%d.%d" % (rng.randrange(256), rng.randrange(256), rng.randrange(1, 255))
        if ip not in known_ips:
            break
    attack = template[: m.start("src")] + mac + template[m.end("src"): m.start("ip")] + ip + template[m.end("ip"):]

    result = list(lines)
    for _ in range(copies):
        result.insert(rng.randrange(len(result) + 1), attack)
    indices = [i for i, ln in enumerate(result) if ln == attack]
    _atomic_write(out, ("\n".join(result) + "\n").encode("latin-1"))
    _atomic_write(targets, "".join(f"{i}\n" for i in indices).encode("ascii"))
    return out, targets, indices
