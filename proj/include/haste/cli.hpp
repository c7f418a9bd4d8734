#ifndef HASTE_CLI_HPP
#define HASTE_CLI_HPP

// Command implementations behind the `haste` executable. run_cli() parses
// arguments with CLI11 and maps errors to exit codes:
//   0 success, 1 usage error, 2 input-format error, 3 validation error.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "haste/container.hpp"
#include "haste/error.hpp"
#include "haste/model.hpp"
#include "haste/report.hpp"
#include "haste/runner.hpp"

namespace haste::cli {

enum ExitCode : int { ok = 0, usage = 1, format = 2, validation = 3 };

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class OutputFormat { json, csv };

struct RunOptions {
    std::filesystem::path model;
    std::filesystem::path data;
    RunSettings settings;
    std::vector<unsigned> hyperplanes{16}; // sweep uses all, run the first
    std::filesystem::path out;             // empty = stdout
    OutputFormat format = OutputFormat::json;
    std::size_t compare_images = 1;
};

inline void emit(const RunOptions& o, const std::string& text, std::ostream& out) {
    if (o.out.empty())
        out << text;
    else
        write_file_atomic(o.out, std::string_view(text));
}

inline void cmd_info(const std::filesystem::path& path, std::ostream& out) {
    const Container c = load_container(path);
    if (c.find("images") && c.find("labels")) {
        const Dataset d = dataset_from_container(c);
        out << "dataset: " << d.size() << " samples";
        if (d.size()) out << " of " << Shape{d.images[0].channels(), d.images[0].height(), d.images[0].width()}.str();
        out << "\n";
        for (const auto& t : c.tensors) {
            out << "  " << t.name << " " << dtype_name(t.dtype) << " [";
            for (std::size_t i = 0; i < t.shape.size(); ++i) out << (i ? "," : "") << t.shape[i];
            out << "]\n";
        }
        return;
    }
    const ModelGraph g = model_from_container(c);
    const auto shapes = g.shapes();
    out << "model: input " << g.input.str() << ", " << g.layers.size() << " layers, "
        << g.conv_layers().size() << " conv\n";
    out << std::left << std::setw(6) << "index" << std::setw(16) << "kind" << std::setw(14) << "output"
        << std::setw(12) << "params" << "flops_regular\n";
    std::uint64_t params = 0, flops = 0;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const auto& l = g.layers[i];
        std::uint64_t p = 0;
        if (l.conv) p = l.conv->weight.size() + l.conv->bias.size();
        if (l.bn) p = 4 * l.bn->channels;
        if (l.linear) p = l.linear->weight.size() + l.linear->bias.size();
        const std::uint64_t f = layer_baseline_flops(l, shapes[i]);
        params += p;
        flops += f;
        std::string kind = kind_name(l.kind);
        if (l.conv) kind += " " + std::to_string(l.conv->kernel) + "x" + std::to_string(l.conv->kernel) + (l.conv->haste_eligible ? "" : "*");
        out << std::setw(6) << i << std::setw(16) << kind << std::setw(14) << shapes[i].str() << std::setw(12) << p << f
            << "\n";
    }
    out << "total params " << params << ", regular FLOPs " << flops << "\n";
    for (const auto& t : c.tensors) {
        out << "  " << t.name << " " << dtype_name(t.dtype) << " [";
        for (std::size_t i = 0; i < t.shape.size(); ++i) out << (i ? "," : "") << t.shape[i];
        out << "]\n";
    }
}

inline RunSettings settings_for(const RunOptions& o, unsigned hyperplanes) {
    RunSettings s = o.settings;
    s.hyperplanes = hyperplanes;
    return s;
}

inline void cmd_run(const RunOptions& o, std::ostream& out) {
    if (o.hyperplanes.size() != 1) throw UsageError("run takes a single -L value");
    const ModelGraph g = load_model(o.model);
    const Dataset d = load_dataset(o.data);
    const EvalReport r = evaluate(g, d, settings_for(o, o.hyperplanes.front()));
    emit(o, o.format == OutputFormat::json ? to_json(r).dump(2) + "\n" : to_csv(r), out);
}

inline void cmd_sweep(const RunOptions& o, std::ostream& out) {
    if (o.hyperplanes.empty()) throw UsageError("sweep needs at least one -L value");
    for (std::size_t i = 1; i < o.hyperplanes.size(); ++i)
        if (o.hyperplanes[i] <= o.hyperplanes[i - 1]) throw UsageError("-L values must be strictly ascending");
    if (o.settings.mode == Mode::baseline) throw UsageError("sweep needs mode haste or random");
    const ModelGraph g = load_model(o.model);
    const Dataset d = load_dataset(o.data);
    std::vector<SweepRow> rows;
    for (unsigned l : o.hyperplanes) rows.push_back(sweep_row(evaluate(g, d, settings_for(o, l)), g));
    emit(o, o.format == OutputFormat::json ? sweep_json(o.settings, rows).dump(2) + "\n" : sweep_csv(rows), out);
}

inline void cmd_compare(const RunOptions& o, std::ostream& out) {
    if (o.hyperplanes.size() != 1) throw UsageError("compare takes a single -L value");
    if (o.settings.mode == Mode::baseline) throw UsageError("compare needs mode haste or random");
    const ModelGraph g = load_model(o.model);
    const Dataset d = load_dataset(o.data);
    const RunSettings s = settings_for(o, o.hyperplanes.front());
    const auto deltas = compare(g, d, s, o.compare_images);
    emit(o, o.format == OutputFormat::json ? compare_json(s, deltas).dump(2) + "\n" : compare_csv(deltas), out);
}

inline int exit_code_of(std::exception_ptr e, std::ostream& err) {
    try {
        std::rethrow_exception(e);
    } catch (const UsageError& x) {
        err << "usage error: " << x.what() << "\n";
        return usage;
    } catch (const FormatError& x) {
        err << "format error: " << x.what() << "\n";
        return format;
    } catch (const ValidationError& x) {
        err << "validation error: " << x.what() << "\n";
        return validation;
    } catch (const ConfigError& x) {
        err << "invalid configuration: " << x.what() << "\n";
        return validation;
    } catch (const std::exception& x) {
        err << "error: " << x.what() << "\n";
        return usage;
    }
}

/// Parses `args` (without the program name) and runs the chosen command.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"HASTE convolution: training-free channel merging via locality-sensitive hashing", "haste"};
    app.require_subcommand(1);

    RunOptions o;
    std::string mode = "haste", fmt = "json";
    std::string seeds = "0,1,2";
    std::filesystem::path info_path;

    auto* info = app.add_subcommand("info", "Summarize a model or dataset container");
    info->add_option("path", info_path, "Container file")->required();

    auto add_common = [&](CLI::App* sub, bool multi_l) {
        sub->add_option("--model", o.model, "Model container")->required();
        sub->add_option("--data", o.data, "Dataset container")->required();
        sub->add_option("--mode", mode, "baseline, haste or random")->capture_default_str();
        auto* l = sub->add_option("-L,--hyperplanes", o.hyperplanes, multi_l ? "Hyperplane counts (comma list)" : "Hyperplane count")
                      ->delimiter(',')
                      ->capture_default_str();
        if (!multi_l) l->expected(1);
        sub->add_option("--sparsity", o.settings.sparsity, "Fraction of zero hyperplane entries")->capture_default_str();
        sub->add_option("--halo", o.settings.halo, "Patch halo g")->capture_default_str();
        sub->add_option("--seeds", seeds, "Comma-separated seeds")->capture_default_str();
        sub->add_option("--start-layer", o.settings.start_layer, "First conv (0-based) to replace")->capture_default_str();
        sub->add_option("--out", o.out, "Output file (default stdout)");
        sub->add_option("--format", fmt, "json or csv")->capture_default_str();
    };
    auto* run = app.add_subcommand("run", "Evaluate accuracy and FLOPs");
    add_common(run, false);
    auto* sweep = app.add_subcommand("sweep", "Evaluate over several -L values");
    add_common(sweep, true);
    auto* cmp = app.add_subcommand("compare", "Per-layer output deltas between direct and HASTE paths");
    add_common(cmp, false);
    cmp->add_option("--images", o.compare_images, "Number of dataset images to compare")->capture_default_str();

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return usage;
    }

    try {
        if (*info) {
            cmd_info(info_path, out);
            return ok;
        }
        try {
            o.settings.mode = parse_mode(mode);
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
        if (fmt == "json")
            o.format = OutputFormat::json;
        else if (fmt == "csv")
            o.format = OutputFormat::csv;
        else
            throw UsageError("unknown format '" + fmt + "' (expected json or csv)");
        o.settings.seeds.clear();
        std::stringstream ss(seeds);
        for (std::string tok; std::getline(ss, tok, ',');) {
            std::size_t used = 0;
            std::uint64_t v = 0;
            try {
                v = std::stoull(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (tok.empty() || used != tok.size()) throw UsageError("bad seed '" + tok + "'");
            o.settings.seeds.push_back(v);
        }
        if (o.settings.seeds.empty()) throw UsageError("--seeds is empty");

        if (*run) cmd_run(o, out);
        if (*sweep) cmd_sweep(o, out);
        if (*cmp) cmd_compare(o, out);
        return ok;
    } catch (...) {
        return exit_code_of(std::current_exception(), err);
    }
}

} // namespace haste::cli

#endif // HASTE_CLI_HPP
