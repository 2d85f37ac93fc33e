#!/usr/bin/env python3
"""
Streamlit Verification Console for LL/SC benchmark, verification and audit reports
"""

import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import plotly.express as px
import streamlit as st
from dotenv import load_dotenv
from pydantic import BaseModel

from app.services.bench import STEP_BOUNDS, BenchConfig, run_bench
from app.services.lin_harness import explore_and_check
from app.services.memcell import Strategy
from app.services.scenarios import build_scenario

load_dotenv()
logger = logging.getLogger("Bench")

# Page configuration
st.set_page_config(
    page_title="LL/SC Verification Console",
    page_icon="🔬",
    layout="wide",
    initial_sidebar_state="expanded"
)

# Custom CSS
st.markdown("""
<style>
    .main-header {
        font-size: 2.5rem;
        font-weight: bold;
        color: #1f77b4;
        text-align: center;
        margin-bottom: 2rem;
    }
    .status-pass { color: #28a745; font-weight: bold; }
    .status-fail { color: #dc3545; font-weight: bold; }
    .status-truncated { color: #fd7e14; font-weight: bold; }
</style>
""", unsafe_allow_html=True)

REPORT_KINDS = ("bench", "verify", "check", "audit")


class ReportEntry(BaseModel):
    """One saved report plus the fields the console filters and charts on."""
    name: str
    kind: str
    impl: str = ""
    modified: datetime
    status: str
    violations: List[str] = []
    interleavings: Optional[int] = None
    ops_per_sec: Optional[float] = None
    truncated: bool = False
    op_stats: Dict[str, Dict[str, int]] = {}
    payload: Dict[str, Any] = {}


def _kind_of(name: str, payload: Dict[str, Any]) -> str:
    prefix = name.split("-", 1)[0]
    if prefix in REPORT_KINDS:
        return prefix
    if "set_difference" in payload:
        return "audit"
    if "linearizable" in payload:
        return "check"
    if "scenario" in payload:
        return "verify"
    return "bench"


def _entry(name: str, modified: datetime, payload: Dict[str, Any]) -> ReportEntry:
    kind = _kind_of(name, payload)
    if kind == "check":
        violations = [] if payload.get("linearizable") else [payload.get("reason") or "not linearizable"]
        return ReportEntry(
            name=name, kind=kind, modified=modified,
            status="pass" if not violations else "fail", violations=violations, payload=payload,
        )
    if kind == "verify":
        violations = [f"{v['kind']}: {v['detail']}" for v in payload.get("violations", [])]
        truncated = bool(payload.get("truncated"))
        return ReportEntry(
            name=name, kind=kind, impl=payload.get("scenario", ""), modified=modified,
            status="fail" if payload.get("violations_total") else "truncated" if truncated else "pass",
            violations=violations, interleavings=payload.get("interleavings"), truncated=truncated,
            op_stats=payload.get("op_stats", {}), payload=payload,
        )
    violations = list(payload.get("violations", []))
    impl = payload.get("config", {}).get("impl", "") if kind == "bench" else "audit"
    verification = payload.get("verification") or {}
    return ReportEntry(
        name=name, kind=kind, impl=impl, modified=modified,
        status="fail" if violations else "truncated" if verification.get("truncated") else "pass",
        violations=violations,
        interleavings=verification.get("interleavings"),
        ops_per_sec=payload.get("ops_per_sec"),
        truncated=bool(verification.get("truncated")),
        op_stats=payload.get("op_stats", {}),
        payload=payload,
    )


class VerificationConsole:
    def __init__(self):
        self.reports_dir = Path(os.getenv("LLSC_REPORTS_DIR", "reports"))

    def get_reports(self) -> List[ReportEntry]:
        """Load every JSON report under the reports directory"""
        if not self.reports_dir.is_dir():
            return []
        entries = []
        for path in sorted(self.reports_dir.glob("*.json")):
            try:
                payload = json.loads(path.read_text())
                modified = datetime.fromtimestamp(path.stat().st_mtime)
                entries.append(_entry(path.stem, modified, payload))
            except (OSError, ValueError) as e:
                logger.error(f"Skipping unreadable report {path}: {str(e)}")
                st.error(f"Could not read {path.name}: {str(e)}")
        return sorted(entries, key=lambda e: e.modified, reverse=True)


@st.cache_data(show_spinner="Generating sample reports...")
def sample_reports() -> List[Dict[str, Any]]:
    """Small real runs so an empty reports directory still has something to show"""
    samples = []
    for impl in ("counter", "llsc", "swcopy"):
        report = run_bench(BenchConfig(impl=impl, threads=2, ops=400, seed=1))
        samples.append({"name": f"bench-{impl}-hw-sample", "payload": report.model_dump(mode="json")})
    for impl, bound in (("weakllsc", None), ("llsc", 1), ("swcopy", 1)):
        report = explore_and_check(build_scenario(impl, procs=2), Strategy.EXHAUSTIVE, 5_000, preemption_bound=bound)
        samples.append({"name": f"verify-{impl}-sample", "payload": report.model_dump(mode="json")})
    return samples


def render_header():
    """Render the main header"""
    st.markdown('<h1 class="main-header">🔬 LL/SC Verification Console</h1>', unsafe_allow_html=True)
    st.markdown("---")


def render_sidebar(console: VerificationConsole, reports: List[ReportEntry]):
    """Render sidebar with filters and controls"""
    st.sidebar.header("🔧 Controls")

    if st.sidebar.button("🔄 Refresh Reports", type="primary"):
        st.rerun()

    st.sidebar.caption(f"Reports directory: `{console.reports_dir}`")

    st.sidebar.subheader("📋 Filters")
    selected_kind = st.sidebar.selectbox("Report type", ["All", *REPORT_KINDS])
    selected_status = st.sidebar.selectbox("Status", ["All", "pass", "fail", "truncated"])
    impls = ["All"] + sorted({r.impl for r in reports if r.impl})
    selected_impl = st.sidebar.selectbox("Implementation", impls)

    return {
        "kind": selected_kind,
        "status": selected_status,
        "impl": selected_impl,
    }


def render_metrics(reports: List[ReportEntry]):
    """Render key metrics"""
    st.subheader("📈 Key Metrics")

    col1, col2, col3, col4, col5 = st.columns(5)

    total = len(reports)
    with col1:
        st.metric("Reports", total)

    with col2:
        passed = len([r for r in reports if r.status == "pass"])
        pass_rate = (passed / total * 100) if total > 0 else 0
        st.metric("Pass Rate", f"{pass_rate:.1f}%")

    with col3:
        st.metric("Violations", sum(len(r.violations) for r in reports))

    with col4:
        st.metric("Truncated", len([r for r in reports if r.truncated]))

    with col5:
        explored = sum(r.interleavings or 0 for r in reports)
        st.metric("Interleavings", f"{explored:,}")

    throughput = [r.ops_per_sec for r in reports if r.ops_per_sec]
    if throughput:
        st.subheader("⏱️ Throughput")
        col_perf1, col_perf2 = st.columns(2)
        with col_perf1:
            st.metric("Best ops/s", f"{max(throughput):,.0f}")
        with col_perf2:
            st.metric("Mean ops/s", f"{sum(throughput) / len(throughput):,.0f}")


def _step_rows(reports: List[ReportEntry]) -> pd.DataFrame:
    rows = []
    for r in reports:
        for label, stats in r.op_stats.items():
            if label in STEP_BOUNDS:
                rows.append({"Operation": label, "Max steps": stats.get("max_units", 0), "Report": r.name})
        for row in r.payload.get("step_bounds", []):
            rows.append({"Operation": row["label"], "Max steps": row["max_units"], "Report": r.name})
    if not rows:
        return pd.DataFrame(columns=["Operation", "Max steps", "Bound"])
    frame = pd.DataFrame(rows).groupby("Operation", as_index=False)["Max steps"].max()
    frame["Bound"] = frame["Operation"].map(STEP_BOUNDS)
    return frame.dropna(subset=["Bound"])


def render_charts(reports: List[ReportEntry]):
    """Render charts and visualizations"""
    st.subheader("📊 Analytics")

    col1, col2 = st.columns(2)

    with col1:
        frame = _step_rows(reports)
        if not frame.empty:
            melted = frame.melt(id_vars="Operation", value_vars=["Max steps", "Bound"], var_name="Series", value_name="Steps")
            fig_steps = px.bar(
                melted,
                x="Operation",
                y="Steps",
                color="Series",
                barmode="group",
                title="Observed worst-case steps against documented bounds",
                color_discrete_map={"Max steps": "#1f77b4", "Bound": "#adb5bd"}
            )
            fig_steps.update_layout(xaxis_title="Operation", yaxis_title="Shared steps")
            st.plotly_chart(fig_steps, use_container_width=True)
        else:
            st.info("No step statistics in the selected reports")

    with col2:
        status_counts: Dict[str, int] = {}
        for r in reports:
            status_counts[r.status] = status_counts.get(r.status, 0) + 1
        if status_counts:
            fig_pie = px.pie(
                values=list(status_counts.values()),
                names=list(status_counts.keys()),
                title="Report Status Distribution",
                color=list(status_counts.keys()),
                color_discrete_map={"pass": "#28a745", "fail": "#dc3545", "truncated": "#fd7e14"}
            )
            st.plotly_chart(fig_pie, use_container_width=True)

    bench = [r for r in reports if r.kind == "bench" and r.payload.get("per_thread_ops")]
    if bench:
        rows = []
        for r in bench:
            for thread, ops in enumerate(r.payload["per_thread_ops"]):
                rows.append({"Report": r.name, "Thread": str(thread), "Ops": ops})
        fig_threads = px.bar(
            pd.DataFrame(rows), x="Report", y="Ops", color="Thread", title="Completed operations per thread"
        )
        st.plotly_chart(fig_threads, use_container_width=True)


def render_reports_table(reports: List[ReportEntry]):
    """Render the report table and the violation export"""
    st.subheader("📋 Reports")

    if not reports:
        st.info("No reports match the current filters.")
        return

    df = pd.DataFrame([
        {
            "Report": r.name,
            "Type": r.kind,
            "Implementation": r.impl or "N/A",
            "Status": r.status,
            "Violations": len(r.violations),
            "Interleavings": r.interleavings if r.interleavings is not None else "N/A",
            "Ops/s": f"{r.ops_per_sec:,.0f}" if r.ops_per_sec else "N/A",
            "Modified": r.modified.strftime("%Y-%m-%d %H:%M:%S"),
        }
        for r in reports
    ])

    def style_status(val):
        if val == "pass":
            return "color: #28a745; font-weight: bold"
        elif val == "fail":
            return "color: #dc3545; font-weight: bold"
        elif val == "truncated":
            return "color: #fd7e14; font-weight: bold"
        return ""

    st.dataframe(df.style.map(style_status, subset=["Status"]), use_container_width=True)

    violations = pd.DataFrame(
        [{"Report": r.name, "Violation": v} for r in reports for v in r.violations],
        columns=["Report", "Violation"],
    )
    if not violations.empty:
        st.subheader("❌ Violations")
        st.dataframe(violations, use_container_width=True)
        st.download_button(
            label="Download violations CSV",
            data=violations.to_csv(index=False),
            file_name=f"llsc_violations_{datetime.now().strftime('%Y%m%d_%H%M%S')}.csv",
            mime="text/csv"
        )


def render_report_details(reports: List[ReportEntry]):
    """Render detailed view for the selected report"""
    st.subheader("🔍 Report Details")

    if not reports:
        st.info("No reports available for detailed view.")
        return

    options = [f"{r.name} ({r.status})" for r in reports]
    selected_idx = st.selectbox("Select Report", range(len(options)), format_func=lambda x: options[x])
    selected = reports[selected_idx]

    col1, col2 = st.columns(2)
    with col1:
        st.markdown("**Summary**")
        st.write(f"**Type:** {selected.kind}")
        st.write(f"**Implementation:** {selected.impl or 'N/A'}")
        st.write(f"**Status:** {selected.status}")
        st.write(f"**Interleavings:** {selected.interleavings if selected.interleavings is not None else 'N/A'}")
    with col2:
        config = selected.payload.get("config")
        if config:
            st.markdown("**Configuration**")
            st.json(config)

    if selected.op_stats:
        st.markdown("**Per-operation steps**")
        stats = pd.DataFrame.from_dict(selected.op_stats, orient="index")
        stats["bound"] = [STEP_BOUNDS.get(label) for label in stats.index]
        st.dataframe(stats, use_container_width=True)

    for v in selected.violations[:20]:
        st.error(v)

    if st.checkbox("Show Complete Raw JSON Data"):
        st.json(selected.payload)


def main():
    """Main function to run the verification console"""
    console = VerificationConsole()

    render_header()

    all_reports = console.get_reports()

    if not all_reports:
        st.warning(f"⚠️ No reports found in `{console.reports_dir}`.")
        st.write("- Run `python cli.py verify --impl llsc --save` or `./verify.sh` to create some")
        st.write("- Or point LLSC_REPORTS_DIR at an existing reports directory")
        st.info("📊 Showing sample reports for demonstration...")
        now = datetime.now()
        all_reports = [_entry(s["name"], now, s["payload"]) for s in sample_reports()]

    filters = render_sidebar(console, all_reports)

    filtered = all_reports
    if filters["kind"] != "All":
        filtered = [r for r in filtered if r.kind == filters["kind"]]
    if filters["status"] != "All":
        filtered = [r for r in filtered if r.status == filters["status"]]
    if filters["impl"] != "All":
        filtered = [r for r in filtered if r.impl == filters["impl"]]

    render_metrics(filtered)

    st.markdown("---")
    render_charts(filtered)

    st.markdown("---")
    render_reports_table(filtered)

    st.markdown("---")
    render_report_details(filtered)


if __name__ == "__main__":
    main()
