from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
FIX = ROOT / "tests" / "fixtures"
CWE_XML = FIX / "catalogs" / "cwe_fixture.xml"
CAPEC_XML = FIX / "catalogs" / "capec_fixture.xml"
CWE_414 = ROOT / "tests" / "data" / "cwec_v4.14.xml.xz"
