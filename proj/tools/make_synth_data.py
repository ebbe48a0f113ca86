#!/usr/bin/env python3
"""Regenerates the bundled synthetic datasets under data/.

Everything is deterministic: taxonomy shape 9/26/104/412 mirrors the four
ONS 2020 level widths, leaf titles are unique (domain, role) pairs, and the
200-ad corpus spreads 190 labelled ads over 38 leaves plus 10 ads without a
usable label. Run from the repository root:  python3 tools/make_synth_data.py
"""

import json
import pathlib
import random

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"

MAJORS = [
    "management occupations",
    "science and technology occupations",
    "health occupations",
    "education occupations",
    "business and finance occupations",
    "creative and media occupations",
    "service and sales occupations",
    "logistics and operations occupations",
    "construction and trades occupations",
]
MAJOR_SHORT = [m.split()[0] for m in MAJORS]
SUB_QUAL = ["strategy", "delivery", "support"]
MINOR_QUAL = ["planning", "operations", "analysis", "coordination"]

ROLES = [
    "supervisor", "coordinator", "engineer", "analyst", "technician",
    "assistant", "manager", "specialist", "consultant", "officer",
    "operative", "planner", "administrator", "designer", "inspector",
    "advisor", "developer", "scientist", "therapist", "instructor",
    "surveyor",
]
DOMAINS = [
    "logistics", "retail", "warehouse", "catering", "finance",
    "payroll", "nursing", "laboratory", "software", "network",
    "construction", "plumbing", "marketing", "recruitment", "transport",
    "maintenance", "teaching", "childcare", "farming", "security",
]
DOMAIN_SKILLS = {
    "logistics": ["route planning", "fleet tracking", "stock control"],
    "retail": ["merchandising", "till operation", "customer service"],
    "warehouse": ["forklift licence", "picking", "goods in"],
    "catering": ["food hygiene", "menu planning", "kitchen safety"],
    "finance": ["ledger reconciliation", "forecasting", "excel"],
    "payroll": ["paye", "pension submissions", "timesheets"],
    "nursing": ["patient care", "medication rounds", "care plans"],
    "laboratory": ["sample preparation", "titration", "lab reporting"],
    "software": ["python", "code review", "unit testing"],
    "network": ["routing", "firewall configuration", "cabling"],
    "construction": ["site safety", "setting out", "cscs card"],
    "plumbing": ["pipe fitting", "boiler servicing", "leak detection"],
    "marketing": ["campaign planning", "copywriting", "analytics"],
    "recruitment": ["candidate screening", "interviewing", "onboarding"],
    "transport": ["hgv licence", "tachograph", "route compliance"],
    "maintenance": ["fault finding", "ppm schedules", "hand tools"],
    "teaching": ["lesson planning", "safeguarding", "assessment"],
    "childcare": ["early years", "first aid", "observation records"],
    "farming": ["livestock handling", "crop rotation", "machinery"],
    "security": ["sia licence", "cctv monitoring", "patrols"],
}
GENERIC_SKILLS = ["teamwork", "communication", "rota flexibility", "problem solving"]

DUTIES = {
    "logistics": ["planning delivery routes", "tracking shipments"],
    "retail": ["serving customers", "keeping displays stocked"],
    "warehouse": ["picking orders", "loading pallets"],
    "catering": ["preparing menus", "running a busy kitchen"],
    "finance": ["reconciling accounts", "preparing forecasts"],
    "payroll": ["running monthly payroll", "handling pension returns"],
    "nursing": ["delivering patient care", "updating care plans"],
    "laboratory": ["preparing samples", "recording assay results"],
    "software": ["building internal tools", "reviewing pull requests"],
    "network": ["maintaining the estate network", "configuring firewalls"],
    "construction": ["setting out new plots", "keeping the site safe"],
    "plumbing": ["servicing boilers", "fitting pipework"],
    "marketing": ["planning campaigns", "reporting on reach"],
    "recruitment": ["screening candidates", "arranging interviews"],
    "transport": ["scheduling drivers", "checking tachograph records"],
    "maintenance": ["responding to breakdowns", "running planned checks"],
    "teaching": ["planning lessons", "marking assessments"],
    "childcare": ["supporting early years learning", "keeping daily records"],
    "farming": ["handling livestock", "operating machinery"],
    "security": ["monitoring cctv", "carrying out patrols"],
}

# leaves per minor: first 100 minors carry 4 leaves, the last 4 carry 3,
# giving 104 * 4 - 4 = 412
SUBS_PER_MAJOR = [3, 3, 3, 3, 3, 3, 3, 3, 2]
MINORS_PER_SUB = 4


def leaf_title(k):
    return f"{DOMAINS[(k // len(ROLES)) % len(DOMAINS)]} {ROLES[k % len(ROLES)]}"


def leaf_domain(k):
    return DOMAINS[(k // len(ROLES)) % len(DOMAINS)]


def build_taxonomy():
    rows = [("code", "parent", "level", "title")]
    leaf_codes = []
    minor_index = 0
    leaf_index = 0
    minor_total = sum(SUBS_PER_MAJOR) * MINORS_PER_SUB
    for mi in range(9):
        major = str(mi + 1)
        rows.append((major, "ROOT", 1, MAJORS[mi]))
        for si in range(SUBS_PER_MAJOR[mi]):
            sub = major + str(si + 1)
            sub_title = f"{MAJOR_SHORT[mi]} {SUB_QUAL[si]}"
            rows.append((sub, major, 2, sub_title))
            for ni in range(MINORS_PER_SUB):
                minor = sub + str(ni + 1)
                rows.append((minor, sub, 3, f"{sub_title} {MINOR_QUAL[ni]}"))
                leaves = 4 if minor_index < minor_total - 4 else 3
                for li in range(leaves):
                    unit = minor + str(li + 1)
                    rows.append((unit, minor, 4, leaf_title(leaf_index)))
                    leaf_codes.append((unit, leaf_index))
                    leaf_index += 1
                minor_index += 1
    return rows, leaf_codes


def write_taxonomy(rows, path):
    lines = ["# synthetic four-level taxonomy, ONS 2020 level widths (9/26/104/412)"]
    lines.append(",".join(rows[0]))
    for code, parent, level, title in rows[1:]:
        lines.append(f"{code},{parent},{level},{title}")
    path.write_text("\n".join(lines) + "\n")


def write_toy_taxonomy(path):
    lines = [
        "# miniature three-level taxonomy for quick starts",
        "code,parent,level,title",
        "1,ROOT,1,management occupations",
        "11,1,2,corporate management",
        "111,11,3,chief executive",
        "112,11,3,production manager",
        "12,1,2,retail management",
        "121,12,3,shop manager",
        "2,ROOT,1,science occupations",
        "21,2,2,laboratory science",
        "211,21,3,chemist",
    ]
    path.write_text("\n".join(lines) + "\n")


def make_ads(leaf_codes):
    rng = random.Random(20)
    chosen = [leaf_codes[i * 11] for i in range(38)]  # spread over the tree
    variants = ["", "senior ", "junior ", "lead ", "trainee "]
    decorations = ["", " (night shift)", "", " - immediate start", ""]
    ads = []
    for code, k in chosen:
        title = leaf_title(k)
        domain = leaf_domain(k)
        duties = DUTIES[domain]
        skills_pool = DOMAIN_SKILLS[domain]
        for v in range(5):
            body = (
                f"We are looking for a {variants[v]}{title} to join the team. "
                f"The role involves {duties[v % 2]} and {duties[(v + 1) % 2]}. "
                f"Experience with {skills_pool[v % 3]} is preferred."
            )
            skills = [skills_pool[v % 3], skills_pool[(v + 1) % 3],
                      GENERIC_SKILLS[(k + v) % len(GENERIC_SKILLS)]]
            ads.append({
                "id": f"synth-{len(ads) + 1:04d}",
                "title": f"{variants[v]}{title}{decorations[v]}",
                "description": body,
                "skills": skills,
                "labels": {"ons2020": code},
            })
    extras = [
        ("general operative", "Varied duties across our sites.", {}),
        ("seasonal helper", "Short term cover over the holidays.", {}),
        ("weekend staff", "Join our weekend rota.", {}),
        ("office junior", "Supporting the back office.", {}),
        ("temporary cover", "Maternity cover position.", {}),
        ("casual worker", "Ad hoc shifts as required.", {}),
        ("bank staff", "Flexible bank contract.", {"ons2020": "0"}),
        ("zero hours role", "Hours to suit.", {"ons2020": "0"}),
        ("various roles", "Multiple openings.", {"ons2020": "0"}),
        ("open application", "Send us your details.", {"ons2020": "0"}),
    ]
    for title, body, labels in extras:
        ads.append({
            "id": f"synth-{len(ads) + 1:04d}",
            "title": title,
            "description": body,
            "skills": [GENERIC_SKILLS[len(ads) % len(GENERIC_SKILLS)]],
            "labels": labels,
        })
    rng.shuffle(ads)
    return ads


def write_vocab(ads, path):
    words = set()
    for ad in ads:
        for w in ad["title"].replace("(", " ").replace(")", " ").replace("-", " ").split():
            words.add(w.lower())
    pieces = sorted(words)
    pieces += ["##s", "##ing", "##er", "##ion", "[UNK]"]
    path.write_text("\n".join(pieces) + "\n")


def write_search_space(path):
    space = {
        "dims": [
            {"name": "learning_rate", "kind": "log_uniform", "lo": 1e-6, "hi": 1e-1},
            {"name": "weight_decay", "kind": "log_uniform", "lo": 1e-9, "hi": 1e-2},
            {"name": "epochs", "kind": "quantized", "lo": 5, "hi": 100, "step": 5},
            {"name": "hidden_dropout", "kind": "quantized", "lo": 0.10, "hi": 0.60, "step": 0.05},
        ]
    }
    path.write_text(json.dumps(space, indent=2) + "\n")


def main():
    DATA.mkdir(exist_ok=True)
    rows, leaf_codes = build_taxonomy()
    assert len(leaf_codes) == 412, len(leaf_codes)
    write_taxonomy(rows, DATA / "taxonomy_ons2020_synth.csv")
    write_toy_taxonomy(DATA / "taxonomy_toy.csv")
    ads = make_ads(leaf_codes)
    assert len(ads) == 200, len(ads)
    with open(DATA / "ads_200.jsonl", "w") as f:
        for ad in ads:
            f.write(json.dumps(ad) + "\n")
    write_vocab(ads, DATA / "vocab_demo.txt")
    write_search_space(DATA / "search_space_demo.json")
    print(f"wrote {len(rows) - 1} taxonomy nodes, {len(ads)} ads")


if __name__ == "__main__":
    main()
