// halfcloud command-line tool.
//
// Exit codes: 0 success, 1 a checked bound is violated (or a rerun does not
// reproduce its manifest), 2 usage or input error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "halfcloud/halfcloud.hpp"
#include "manifest.hpp"
#include "scenario_config.hpp"

#ifndef HALFCLOUD_VERSION
#define HALFCLOUD_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace halfcloud;
using halfcloud::cli::Json;
using halfcloud::cli::RunRecord;

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kUsage = 2;

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Json grid_json(const GridSpec& g) {
  return Json{{"origin", vec_json(g.origin)}, {"spacing", g.spacing}, {"dims", g.dims}};
}

void finish_manifest(const RunRecord& record, const fs::path& path) {
  cli::write_text(path, cli::manifest_json(record, HALFCLOUD_VERSION).dump(2) + "\n");
}

std::string write_cloud_bytes(const PointCloud& cloud, const fs::path& path, bool ascii) {
  const std::string bytes = serialize_cloud(cloud, format_for_path(path, ascii));
  cli::write_text(path, bytes);
  return bytes;
}

/// "ox,oy,oz,h,nx,ny,nz" or the path of a cloud carrying grid metadata.
GridSpec parse_grid_option(const std::string& value) {
  if (fs::exists(value)) {
    const auto c = read_cloud(value, CloudSource::Structured);
    if (!c.grid) throw Error(value + ": no grid metadata in file");
    return *c.grid;
  }
  std::vector<double> v;
  try {
    v = cli::detail::parse_numbers(value);
  } catch (const Error& e) {
    throw Error("--grid: " + std::string(e.what()));
  }
  if (v.size() != 7) throw Error("--grid expects ox,oy,oz,h,nx,ny,nz or a file with grid metadata");
  GridSpec g{{v[0], v[1], v[2]}, v[3], {}};
  for (std::size_t a = 0; a < 3; ++a) {
    if (v[4 + a] != std::floor(v[4 + a])) throw Error("--grid: dimensions must be integers");
    g.dims[a] = static_cast<std::int64_t>(v[4 + a]);
  }
  g.validate();
  return g;
}

std::vector<Origin> read_tags(const fs::path& path, std::size_t expected) {
  std::istringstream in(detail::read_file(path));
  std::vector<Origin> tags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t == "struct")
      tags.push_back(Origin::Structured);
    else if (t == "un")
      tags.push_back(Origin::Unstructured);
    else
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected 'struct' or 'un'");
  }
  if (tags.size() != expected)
    throw Error(path.string() + ": " + std::to_string(tags.size()) + " tags for " + std::to_string(expected) + " points");
  return tags;
}

Json worst_json(const std::optional<WorstCase>& w) {
  if (!w) return nullptr;
  return Json{{"location", w->location}, {"measured", w->measured}, {"allowed", w->allowed}};
}

Json bound_json(const BoundReport& r, std::optional<double> probe_width) {
  Json j;
  j["bound"] = r.bound_name;
  if (probe_width) j["probe_width"] = *probe_width;
  j["holds"] = r.holds;
  j["violations"] = r.violations;
  j["worst"] = worst_json(r.worst);
  Json cases = Json::array();
  for (const auto& c : r.cases)
    cases.push_back(Json{{"name", c.name},
                         {"allowed", c.allowed},
                         {"checked", c.checked},
                         {"violations", c.violations},
                         {"worst", worst_json(c.worst)}});
  j["cases"] = std::move(cases);
  return j;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string config;
  std::string out_struct;
  std::string out_un;
  std::string manifest;
  bool ascii = false;
  unsigned threads = 0;
};

int cmd_synth(const SynthOptions& o, RunRecord& record) {
  const auto sc = cli::load_scenario(o.config);
  record.add_input(o.config);
  const auto surface = builtin_shape(sc.shape);

  const auto structured = sample_structured(surface, sc.grid, o.threads);
  auto unstructured = sample_unstructured({surface, sc.views, sc.samples, sc.seed}, o.threads);
  std::vector<std::size_t> outliers;
  if (sc.outlier_count > 0) {
    auto inj = inject_outliers(unstructured, sc.outlier_count, sc.outlier_spread, sc.seed ^ 0x9e3779b97f4a7c15ULL);
    unstructured = std::move(inj.cloud);
    outliers = std::move(inj.indices);
  }

  Json views = Json::array();
  for (const auto& v : sc.views) views.push_back(vec_json(v));
  record.params = Json{{"shape", sc.shape},
                       {"grid", grid_json(sc.grid)},
                       {"views", views},
                       {"samples", sc.samples},
                       {"outliers", Json{{"count", sc.outlier_count}, {"spread", sc.outlier_spread}}}};
  record.seed = sc.seed;

  record.add_output(o.out_struct, write_cloud_bytes(structured, o.out_struct, o.ascii));
  record.add_output(o.out_un, write_cloud_bytes(unstructured, o.out_un, o.ascii));
  if (!outliers.empty()) {
    std::string text;
    for (auto i : outliers) text += std::to_string(i) + "\n";
    const std::string path = o.out_un + ".outliers";
    cli::write_text(path, text);
    record.add_output(path, text);
  }
  std::cerr << "synth: " << structured.size() << " structured, " << unstructured.size() << " unstructured points\n";
  finish_manifest(record, o.manifest.empty() ? o.out_struct + ".manifest.json" : o.manifest);
  return kOk;
}

// ---------------------------------------------------------------- merge

struct MergeOptions {
  std::string in_struct;
  std::string in_un;
  std::string out;
  std::size_t k = MergeParams{}.k;
  std::optional<double> d_un;
  double cos_theta_min = MergeParams{}.cos_theta_min;
  std::size_t fill_min_support = MergeParams{}.fill_min_support;
  std::optional<double> outlier_radius_un;
  std::optional<double> d_struct_bound;
  bool no_outlier_filter = false;
  std::string report;
  std::string tags;
  std::string manifest;
  bool ascii = false;
  unsigned threads = 0;
};

Json report_json(const MergeReport& r) {
  Json j;
  j["n_struct_in"] = r.n_struct_in;
  j["n_un_in"] = r.n_un_in;
  j["n_selected_un"] = r.n_selected_un;
  j["n_fill_struct"] = r.n_fill_struct;
  j["n_outliers_un"] = r.outliers_un.size();
  j["n_outliers_struct"] = r.outliers_struct.size();
  j["measured_d_half"] = r.measured_d_half ? Json(*r.measured_d_half) : Json(nullptr);
  j["selected_un"] = r.selected_un;
  j["fill_struct"] = r.fill_struct;
  j["outliers_un"] = r.outliers_un;
  j["outliers_struct"] = r.outliers_struct;
  return j;
}

int cmd_merge(const MergeOptions& o, RunRecord& record) {
  const auto p_struct = read_cloud(o.in_struct, CloudSource::Structured);
  const auto p_un = read_cloud(o.in_un, CloudSource::Unstructured);
  record.add_input(o.in_struct);
  record.add_input(o.in_un);

  MergeParams params;
  params.k = o.k;
  params.cos_theta_min = o.cos_theta_min;
  params.fill_min_support = o.fill_min_support;
  params.threads = o.threads;
  if (o.d_un)
    params.d_un = *o.d_un;
  else if (p_struct.grid)
    params.d_un = 2.0 * p_struct.grid->spacing;
  else
    throw Error("--d-un is required when the structured input has no grid metadata");
  params.outlier_radius_un = o.outlier_radius_un.value_or(params.d_un * std::sqrt(3.0));
  if (o.no_outlier_filter) {
    params.outlier_mode = OutlierMode::None;
  } else if (o.d_struct_bound) {
    params.outlier_mode = OutlierMode::FilterBoth;
    params.outlier_radius_struct = *o.d_struct_bound;
  }

  const auto result = merge(p_struct, p_un, params);

  const char* mode = params.outlier_mode == OutlierMode::None            ? "none"
                     : params.outlier_mode == OutlierMode::FilterBoth ? "filter_both"
                                                                       : "trust_structured";
  record.params = Json{{"k", params.k},
                       {"d_un", params.d_un},
                       {"cos_theta_min", params.cos_theta_min},
                       {"fill_min_support", params.fill_min_support},
                       {"outlier_radius_un", params.outlier_radius_un},
                       {"outlier_mode", mode},
                       {"d_struct_bound", o.d_struct_bound ? Json(*o.d_struct_bound) : Json(nullptr)}};

  record.add_output(o.out, write_cloud_bytes(result.half, o.out, o.ascii));
  std::string tags;
  for (auto t : result.report.origins) {
    tags += to_string(t);
    tags += '\n';
  }
  const std::string tags_path = o.tags.empty() ? o.out + ".tags" : o.tags;
  cli::write_text(tags_path, tags);
  record.add_output(tags_path, tags);
  if (!o.report.empty()) {
    const std::string text = report_json(result.report).dump(2) + "\n";
    cli::write_text(o.report, text);
    record.add_output(o.report, text);
  }
  std::cerr << "merge: " << result.report.n_selected_un << " unstructured + " << result.report.n_fill_struct
            << " structured fill points\n";
  finish_manifest(record, o.manifest.empty() ? o.out + ".manifest.json" : o.manifest);
  return kOk;
}

// ---------------------------------------------------------------- verify

struct VerifyOptions {
  std::string cloud;
  std::string tags;
  double d_struct = 0.0;
  std::optional<double> d_un;
  std::string grid;
  std::size_t k = MergeParams{}.k;
  std::vector<double> probe_widths;
  std::string manifest;
  unsigned threads = 0;
};

int cmd_verify(const VerifyOptions& o, RunRecord& record, std::ostream& out) {
  const std::string data = detail::read_file(o.cloud);
  PointCloud cloud;
  try {
    cloud = parse_cloud(data);
  } catch (const Error& e) {
    throw Error(o.cloud + ": " + e.what());
  }
  record.add_input(o.cloud);

  std::optional<GridSpec> grid;
  if (!o.grid.empty()) {
    grid = parse_grid_option(o.grid);
    if (fs::exists(o.grid)) record.add_input(o.grid);
  } else {
    grid = cloud.grid;
  }

  std::vector<Origin> tags;
  if (!o.tags.empty()) {
    tags = read_tags(o.tags, cloud.size());
    record.add_input(o.tags);
  } else if (cloud.source == CloudSource::Structured || cloud.source == CloudSource::Unstructured) {
    tags.assign(cloud.size(), cloud.source == CloudSource::Structured ? Origin::Structured : Origin::Unstructured);
  } else {
    throw Error("--tags is required for half-structured clouds");
  }

  double d_un = 0.0;
  if (o.d_un)
    d_un = *o.d_un;
  else if (grid)
    d_un = 2.0 * grid->spacing;
  else
    throw Error("--d-un is required when no grid is known");

  Json checks = Json::array();
  bool holds = true;
  const auto dist = verify_distance_bound(cloud, tags, o.d_struct, d_un, o.threads);
  holds = holds && dist.holds;
  checks.push_back(bound_json(dist, std::nullopt));

  std::vector<double> widths = o.probe_widths;
  if (grid) {
    if (widths.empty()) widths = {grid->spacing, 2.0 * grid->spacing, 5.0 * grid->spacing};
    for (double w : widths) {
      const auto dens = verify_density_bound(cloud, *grid, o.k, w);
      holds = holds && dens.holds;
      checks.push_back(bound_json(dens, w));
    }
  } else if (!widths.empty()) {
    throw Error("--probe-width needs a grid (--grid or grid metadata in the cloud)");
  }

  Json params{{"d_struct", o.d_struct}, {"d_un", d_un}, {"k", o.k}, {"probe_widths", widths}};
  params["grid"] = grid ? grid_json(*grid) : Json(nullptr);
  record.params = params;

  Json report;
  report["holds"] = holds;
  report["checks"] = std::move(checks);
  const std::string text = report.dump(2) + "\n";
  out << text;
  record.add_output(std::string(cli::kStdout), text);
  if (!o.manifest.empty()) finish_manifest(record, o.manifest);
  return holds ? kOk : kViolation;
}

// ---------------------------------------------------------------- stats

struct StatsOptions {
  std::string cloud;
  std::string manifest;
  unsigned threads = 0;
};

int cmd_stats(const StatsOptions& o, RunRecord& record, std::ostream& out) {
  const auto cloud = read_cloud(o.cloud, CloudSource::Unstructured);
  record.add_input(o.cloud);
  Json j;
  j["count"] = cloud.size();
  if (cloud.empty()) {
    j["bbox"] = nullptr;
    j["extents"] = nullptr;
  } else {
    const auto b = bounding_box(cloud);
    j["bbox"] = Json{{"min", vec_json(b.min)}, {"max", vec_json(b.max)}};
    j["extents"] = vec_json(b.extent());
  }
  j["max_nn_distance"] = cloud.size() >= 2 ? Json(max_nn_distance(cloud, o.threads)) : Json(nullptr);
  const std::string text = j.dump(2) + "\n";
  out << text;
  record.add_output(std::string(cli::kStdout), text);
  if (!o.manifest.empty()) finish_manifest(record, o.manifest);
  return kOk;
}

// ---------------------------------------------------------------- dispatch

int run(const std::vector<std::string>& args, std::ostream& out);

int cmd_rerun(const std::string& manifest_path, std::ostream& out) {
  const auto m = cli::load_manifest(manifest_path);
  for (const auto& in : m.inputs)
    if (cli::file_digest(in.path) != in.sha256) throw Error("input changed since the manifest was written: " + in.path);
  if (!m.args.empty() && m.args.front() == "rerun") throw Error("manifest records a rerun");

  std::ostringstream captured;
  const int code = run(m.args, captured);
  out << captured.str();
  std::size_t mismatched = 0;
  for (const auto& a : m.outputs) {
    const std::string now = a.path == cli::kStdout ? cli::sha256_hex(captured.str()) : cli::file_digest(a.path);
    if (now != a.sha256) {
      std::cerr << "rerun: " << a.path << " differs from the manifest\n";
      ++mismatched;
    }
  }
  if (mismatched) return kViolation;
  std::cerr << "rerun: " << m.outputs.size() << " artifacts reproduced\n";
  return code;
}

int run(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Half-structured point cloud toolkit", "halfcloud"};
  app.set_version_flag("--version", HALFCLOUD_VERSION);
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a structured/unstructured cloud pair from a scenario file");
  s->add_option("config", synth.config, "Scenario file")->required();
  s->add_option("out_struct", synth.out_struct, "Structured cloud output")->required();
  s->add_option("out_un", synth.out_un, "Unstructured cloud output")->required();
  s->add_flag("--ascii", synth.ascii, "Write ASCII instead of binary PLY");
  s->add_option("--manifest", synth.manifest, "Manifest path (default <out_struct>.manifest.json)");
  s->add_option("--threads", synth.threads, "Worker threads (default HALFCLOUD_THREADS or all cores)");

  MergeOptions merge_o;
  auto* m = app.add_subcommand("merge", "Merge a structured and an unstructured cloud");
  m->add_option("struct", merge_o.in_struct, "Structured cloud")->required();
  m->add_option("un", merge_o.in_un, "Unstructured cloud")->required();
  m->add_option("out", merge_o.out, "Half-structured output")->required();
  m->add_option("--k", merge_o.k, "Neighbors per anchor")->check(CLI::PositiveNumber);
  m->add_option("--d-un", merge_o.d_un, "Anchor-to-candidate distance (default 2h from grid metadata)");
  m->add_option("--cos-theta-min", merge_o.cos_theta_min, "Minimum normal agreement")->check(CLI::Range(-1.0, 1.0));
  m->add_option("--fill-min-support", merge_o.fill_min_support, "Accepted candidates below which an anchor is kept");
  m->add_option("--outlier-radius-un", merge_o.outlier_radius_un, "Structured support radius (default d_un*sqrt(3))");
  m->add_option("--d-struct-bound", merge_o.d_struct_bound, "Also drop structured points farther than this from "
                                                           "their nearest structured neighbor");
  m->add_flag("--no-outlier-filter", merge_o.no_outlier_filter, "Skip both outlier passes");
  m->add_option("--report", merge_o.report, "Write the merge report as JSON");
  m->add_option("--tags", merge_o.tags, "Origin tags path (default <out>.tags)");
  m->add_flag("--ascii", merge_o.ascii, "Write ASCII instead of binary PLY");
  m->add_option("--manifest", merge_o.manifest, "Manifest path (default <out>.manifest.json)");
  m->add_option("--threads", merge_o.threads, "Worker threads");

  VerifyOptions verify;
  auto* v = app.add_subcommand("verify", "Check the distance and density bounds of a cloud");
  v->add_option("cloud", verify.cloud, "Cloud to check")->required();
  v->add_option("--tags", verify.tags, "Origin tags written by merge");
  v->add_option("--d-struct", verify.d_struct, "Structured nearest-neighbor bound")->required()->check(
      CLI::PositiveNumber);
  v->add_option("--d-un", verify.d_un, "Selection distance (default 2h)");
  v->add_option("--grid", verify.grid, "ox,oy,oz,h,nx,ny,nz or a cloud file with grid metadata");
  v->add_option("--k", verify.k, "k used by the merge")->check(CLI::PositiveNumber);
  v->add_option("--probe-width", verify.probe_widths, "Cube width for the density check (repeatable; default h,2h,5h)")
      ->check(CLI::PositiveNumber);
  v->add_option("--manifest", verify.manifest, "Write a manifest");
  v->add_option("--threads", verify.threads, "Worker threads");

  StatsOptions stats;
  auto* st = app.add_subcommand("stats", "Print point count, bounding box and nearest-neighbor spacing");
  st->add_option("cloud", stats.cloud, "Cloud file")->required();
  st->add_option("--manifest", stats.manifest, "Write a manifest");
  st->add_option("--threads", stats.threads, "Worker threads");

  std::string rerun_path;
  auto* r = app.add_subcommand("rerun", "Repeat the run recorded in a manifest and compare its artifacts");
  r->add_option("manifest", rerun_path, "Manifest file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    app.exit(e);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  RunRecord record;
  record.args = args;
  try {
    if (s->parsed()) {
      record.command = "synth";
      return cmd_synth(synth, record);
    }
    if (m->parsed()) {
      record.command = "merge";
      return cmd_merge(merge_o, record);
    }
    if (v->parsed()) {
      record.command = "verify";
      return cmd_verify(verify, record, out);
    }
    if (st->parsed()) {
      record.command = "stats";
      return cmd_stats(stats, record, out);
    }
    return cmd_rerun(rerun_path, out);
  } catch (const std::exception& e) {
    std::cerr << "halfcloud: error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const int code = run(args, std::cout);
  std::cout.flush();
  return code;
}
