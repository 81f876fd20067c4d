/*
 * Copyright The SMN Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Command-line surface: gen, init-weights, run, verify, bench, formulas.
//
// Exit codes: 0 success, 1 usage error, 2 I/O or format error,
// 3 verification divergence.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smn/engines.hpp"
#include "smn/meter.hpp"
#include "smn/stream.hpp"
#include "smn/verify.hpp"
#include "smn/weights_io.hpp"

namespace smn::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kDiverged = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

inline Mode parse_mode(const std::string& s) {
  if (s == "line") return Mode::Line;
  if (s == "video") return Mode::Video;
  throw UsageError("mode must be line or video, got '" + s + "'");
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad integer list '" + s + "'");
    }
  }
  return out;
}

/// "width:velocity:intensity:class" entries separated by commas; "" or
/// "none" for an empty scene.
inline std::vector<SceneObject> parse_objects(const std::string& s) {
  std::vector<SceneObject> out;
  if (s.empty() || s == "none") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    std::string w, v, i, c;
    if (!std::getline(is, w, ':') || !std::getline(is, v, ':') || !std::getline(is, i, ':') ||
        !std::getline(is, c))
      throw UsageError("object spec must be width:velocity:intensity:class, got '" + item + "'");
    try {
      out.push_back({std::stoi(w), std::stod(v), std::stof(i), std::stoi(c)});
    } catch (const std::exception&) {
      throw UsageError("bad object spec '" + item + "'");
    }
  }
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return is;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  return os;
}

inline void check_stream_matches(const StreamHeader& h, const PyramidSpec& s) {
  if (h.mode != s.mode || h.extent() != s.extent_at(0) ||
      static_cast<int>(h.channels) != s.in_channels)
    throw FormatError("input stream (" + std::string(to_string(h.mode)) + " " +
                      to_string(h.extent()) + " x" + std::to_string(h.channels) +
                      ") does not match the weights (" + to_string(s.mode) + " " +
                      to_string(s.extent_at(0)) + " x" + std::to_string(s.in_channels) + ")");
}

inline std::vector<FeatureMap> read_frames(const std::string& path, const PyramidSpec& s,
                                           std::int64_t limit) {
  std::ifstream is = open_in(path);
  StreamReader reader(is);
  check_stream_matches(reader.header(), s);
  std::vector<FeatureMap> frames;
  while (limit < 0 || static_cast<std::int64_t>(frames.size()) < limit) {
    auto f = reader.next();
    if (!f) break;
    frames.push_back(std::move(*f));
  }
  return frames;
}

struct GenArgs {
  std::string out, mode = "line", objects, dtype = "f32";
  int width = 0, height = 0, channels = 1;
  std::int64_t frames = 0;
  std::uint64_t seed = 0;
  float background = 0.0f;
};

inline int cmd_gen(const GenArgs& a) {
  SceneConfig cfg;
  cfg.mode = parse_mode(a.mode);
  cfg.width = a.width;
  cfg.height = cfg.mode == Mode::Line ? 0 : a.height;
  cfg.channels = a.channels;
  cfg.objects = parse_objects(a.objects);
  cfg.background = a.background;
  cfg.frames = a.frames;
  cfg.seed = a.seed;
  if (a.dtype == "u8") cfg.dtype = DType::U8;
  else if (a.dtype == "f32") cfg.dtype = DType::F32;
  else throw UsageError("dtype must be u8 or f32");
  try {
    validate_scene(cfg);
  } catch (const SpecError& e) {
    throw UsageError(e.what());
  }
  std::ofstream os = open_out(a.out);
  gen_synthetic(cfg, os);
  return kOk;
}

struct InitArgs {
  std::string out, mode = "line", channels, decoder_channels;
  int levels = 0, width = 0, height = 0, classes = 2, in_channels = 1;
  std::uint64_t seed = 0;
};

inline int cmd_init(const InitArgs& a) {
  PyramidConfig cfg;
  cfg.mode = parse_mode(a.mode);
  cfg.levels = a.levels;
  cfg.width = a.width;
  cfg.height = a.height;
  cfg.in_channels = a.in_channels;
  cfg.num_classes = a.classes;
  cfg.channels = a.channels.empty() ? default_channels(a.levels) : parse_int_list(a.channels);
  cfg.decoder_channels = a.decoder_channels.empty() ? default_decoder_channels(a.levels)
                                                    : parse_int_list(a.decoder_channels);
  PyramidSpec spec;
  try {
    spec = validate_spec(cfg);
  } catch (const SpecError& e) {
    throw UsageError(e.what());
  }
  const Weights w = init_weights(spec, a.seed);
  std::ofstream os = open_out(a.out);
  save_weights(w, spec, os);
  return kOk;
}

struct RunArgs {
  std::string engine, weights, input, out, meter;
};

inline int cmd_run(const RunArgs& a) {
  const auto kind = parse_engine_kind(a.engine);
  if (!kind) throw UsageError("engine must be patch, shift or smn");
  auto [spec, w] = load_weights_file(a.weights);
  auto engine = make_engine(*kind, make_model(spec, std::move(w)));

  std::ifstream is = open_in(a.input);
  StreamReader reader(is);
  check_stream_matches(reader.header(), spec);
  std::ofstream os = open_out(a.out);
  LabelWriter labels(os, spec.mode, spec.extent_at(0));
  std::ofstream csv;
  if (!a.meter.empty()) {
    csv = open_out(a.meter);
    csv << "frame,level,cells,mults\n";
  }
  while (auto frame = reader.next()) {
    const EngineOutput out = engine->step(*frame);
    if (out.labels) labels.write(out.frame_index, *out.labels);
    if (csv.is_open())
      for (std::size_t l = 0; l < out.meter.levels.size(); ++l)
        csv << out.frame_index << ',' << l << ',' << out.meter.levels[l].cells << ','
            << out.meter.levels[l].mults << '\n';
  }
  if (!os || (csv.is_open() && !csv)) throw FormatError("failed writing output");
  return kOk;
}

struct VerifyArgs {
  std::string weights, input, inject;
  std::int64_t frames = 0;
  std::int64_t period_stride = 0;
};

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  auto [spec, w] = load_weights_file(a.weights);
  auto model = make_model(spec, std::move(w));
  VerifyOptions opt;
  opt.period_stride = a.period_stride;
  if (!a.inject.empty()) {
    const auto parts = parse_int_list(a.inject);
    if (parts.size() != 2 || parts[1] < 1 || parts[1] > spec.levels)
      throw UsageError("--inject-fault expects FRAME,LEVEL with 1 <= LEVEL <= L");
    opt.fault = FaultInjection{parts[0], parts[1]};
  }
  std::ifstream is = open_in(a.input);
  StreamReader reader(is);
  check_stream_matches(reader.header(), spec);
  const FrameSource next = [&]() { return reader.next(); };
  const EquivalenceReport rep = verify_equivalence(model, next, a.frames, opt);
  if (rep.frames_run <= spec.receptive_field())
    throw UsageError("verify needs more than R_L = " + std::to_string(spec.receptive_field()) +
                     " frames, got " + std::to_string(rep.frames_run));
  if (!rep.equivalent) {
    err << "DIVERGED: " << rep.divergence->describe() << '\n';
    return kDiverged;
  }
  out << "EQUIVALENT: " << rep.frames_run << " frames, " << rep.ready_frames
      << " READY frames compared bitwise, " << rep.period_checks << " period checks\n";
  return kOk;
}

struct BenchArgs {
  std::string weights, input;
  std::int64_t frames = 0;
  int repeat = 1;
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.repeat < 1) throw UsageError("--repeat must be at least 1");
  auto [spec, w] = load_weights_file(a.weights);
  auto model = make_model(spec, std::move(w));
  const std::vector<FeatureMap> frames = read_frames(a.input, spec, a.frames);
  const Geometry g = spec.geometry();
  const std::int64_t t = g.frames();
  if (static_cast<std::int64_t>(frames.size()) < spec.receptive_field() - 1 + t)
    throw UsageError("bench needs at least R_L - 1 + T = " +
                     std::to_string(spec.receptive_field() - 1 + t) + " frames");

  out << std::left << std::setw(8) << "engine" << std::right << std::setw(16)
      << "cells/frame" << std::setw(16) << "expected" << std::setw(16) << "memory cells"
      << std::setw(16) << "ns/frame" << '\n';
  for (EngineKind kind : {EngineKind::Patch, EngineKind::Shift, EngineKind::Smn}) {
    auto engine = make_engine(kind, model);
    std::vector<double> ns;
    double measured = 0;
    for (int r = 0; r < a.repeat; ++r) {
      engine->reset();
      std::uint64_t cells = 0;
      std::int64_t counted = 0;
      const auto start = std::chrono::steady_clock::now();
      // Average over whole stride periods so patch mode amortizes exactly.
      const std::int64_t warm = engine->warmup_frames();
      const std::int64_t stop_at =
          warm + (static_cast<std::int64_t>(frames.size()) - warm) / t * t;
      for (const auto& f : frames) {
        const EngineOutput o = engine->step(f);
        if (o.frame_index >= warm && o.frame_index < stop_at) {
          cells += o.meter.total().cells;
          ++counted;
        }
      }
      const auto stop = std::chrono::steady_clock::now();
      ns.push_back(std::chrono::duration<double, std::nano>(stop - start).count() /
                   static_cast<double>(frames.size()));
      measured = static_cast<double>(cells) / static_cast<double>(counted);
    }
    std::sort(ns.begin(), ns.end());
    const double median = ns.size() % 2 ? ns[ns.size() / 2]
                                        : 0.5 * (ns[ns.size() / 2 - 1] + ns[ns.size() / 2]);
    double expected = 0;
    switch (kind) {
      case EngineKind::Patch:
        expected = static_cast<double>(expected_recompute_cells(g)) / static_cast<double>(g.frames());
        break;
      case EngineKind::Shift: expected = static_cast<double>(expected_recompute_cells(g)); break;
      case EngineKind::Smn: expected = static_cast<double>(expected_front_cells(g)); break;
    }
    out << std::left << std::setw(8) << engine->name() << std::right << std::fixed
        << std::setprecision(2) << std::setw(16) << measured << std::setw(16) << expected
        << std::setw(16) << engine->audit().total_node_cells() << std::setw(16)
        << std::setprecision(0) << median << '\n';
  }
  return kOk;
}

struct FormulaArgs {
  std::string mode = "line";
  int levels = 0, width = 0, height = 0;
};

inline int cmd_formulas(const FormulaArgs& a, std::ostream& out) {
  Geometry g{parse_mode(a.mode), a.levels, a.width, a.height};
  if (g.levels < 0 || g.levels > 24) throw UsageError("levels must be in 0..24");
  const std::int64_t t = g.frames();
  if (g.width <= 0 || g.width % t != 0) throw UsageError("width must be a multiple of 2^levels");
  if (g.mode == Mode::Video && (g.height <= 0 || g.height % t != 0))
    throw UsageError("height must be a multiple of 2^levels");
  const ClosedForms p = closed_forms(g);
  const bool line = g.mode == Mode::Line;

  auto row = [&](const std::string& what, double exact, double approx, const std::string& form) {
    out << std::left << std::setw(30) << what << std::right << std::setw(14)
        << std::setprecision(exact == std::floor(exact) ? 0 : 2) << std::fixed << exact
        << std::setw(14) << std::setprecision(approx == std::floor(approx) ? 0 : 2) << approx
        << "  " << form << '\n';
  };
  out << to_string(g.mode) << " L=" << g.levels << " T=" << t << " W=" << g.width;
  if (!line) out << " H=" << g.height;
  out << '\n'
      << std::left << std::setw(30) << "quantity" << std::right << std::setw(14) << "exact"
      << std::setw(14) << "approx" << "  formula\n";
  row("SMN cells/frame", static_cast<double>(expected_front_cells(g)), p.front_cells,
      line ? "2T-1" : "4(T^2-1)/3");
  row("shift cells/frame", static_cast<double>(expected_recompute_cells(g)), p.recompute_cells,
      line ? "4(4^L-1)/3" : "8(2^3L-1)/7");
  row("patch cells/frame (amortized)",
      static_cast<double>(expected_recompute_cells(g)) / static_cast<double>(t), p.patch_cells,
      line ? "T^2/T" : "T^3/T");
  row("SMN memory node cells", static_cast<double>(expected_smn_node_cells(g)), p.smn_memory,
      line ? "T log T" : "T^2");
  row("shift memory node cells", static_cast<double>(expected_shift_node_cells(g)),
      p.pyramid_memory, line ? "4T^2/3" : "8T^3/7");
  return kOk;
}

/// Entry point shared by the tool and the tests. args excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Streaming shift-memory pyramid segmentation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic moving-object stream");
  g->add_option("--out", gen.out)->required();
  g->add_option("--mode", gen.mode)->required();
  g->add_option("--width", gen.width)->required();
  g->add_option("--height", gen.height);
  g->add_option("--frames", gen.frames)->required();
  g->add_option("--objects", gen.objects, "width:velocity:intensity:class,...")->required();
  g->add_option("--seed", gen.seed)->required();
  g->add_option("--channels", gen.channels);
  g->add_option("--background", gen.background);
  g->add_option("--dtype", gen.dtype, "u8 or f32");

  InitArgs init;
  auto* iw = app.add_subcommand("init-weights", "Write seeded random weights");
  iw->add_option("--out", init.out)->required();
  iw->add_option("--mode", init.mode)->required();
  iw->add_option("--levels", init.levels)->required();
  iw->add_option("--width", init.width)->required();
  iw->add_option("--height", init.height);
  iw->add_option("--channels", init.channels, "encoder widths, comma separated");
  iw->add_option("--decoder-channels", init.decoder_channels);
  iw->add_option("--in-channels", init.in_channels);
  iw->add_option("--classes", init.classes)->required();
  iw->add_option("--seed", init.seed)->required();

  RunArgs run;
  auto* r = app.add_subcommand("run", "Stream an input through one engine");
  r->add_option("--engine", run.engine, "patch, shift or smn")->required();
  r->add_option("--weights", run.weights)->required();
  r->add_option("--input", run.input)->required();
  r->add_option("--out", run.out)->required();
  r->add_option("--meter", run.meter, "per-frame meter CSV");

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Check shift and SMN engines for bitwise equality");
  v->add_option("--weights", verify.weights)->required();
  v->add_option("--input", verify.input)->required();
  v->add_option("--frames", verify.frames)->required();
  v->add_option("--period-stride", verify.period_stride);
  v->add_option("--inject-fault", verify.inject, "FRAME,LEVEL: corrupt an SMN ring slot");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time the engines and report counters");
  b->add_option("--weights", bench.weights)->required();
  b->add_option("--input", bench.input)->required();
  b->add_option("--frames", bench.frames)->required();
  b->add_option("--repeat", bench.repeat);

  FormulaArgs formulas;
  auto* f = app.add_subcommand("formulas", "Print closed-form node counts");
  f->add_option("--mode", formulas.mode)->required();
  f->add_option("--levels", formulas.levels)->required();
  f->add_option("--width", formulas.width)->required();
  f->add_option("--height", formulas.height);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (iw->parsed()) return cmd_init(init);
    if (r->parsed()) return cmd_run(run);
    if (v->parsed()) return cmd_verify(verify, out, err);
    if (b->parsed()) return cmd_bench(bench, out);
    if (f->parsed()) return cmd_formulas(formulas, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

}  // namespace smn::cli
