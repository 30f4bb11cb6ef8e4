#include "macroq/runner.hpp"

#include "macroq/complexity.hpp"
#include "macroq/errors.hpp"
#include "macroq/rng.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

using nlohmann::json;
namespace fs = std::filesystem;

namespace macroq {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

std::string widths_text(const Architecture& arch) {
    std::string out;
    for (size_t i = 0; i < arch.widths.size(); ++i) {
        out += (i ? "|" : "") + std::to_string(arch.widths[i]);
    }
    return out;
}

void parallel_run(int workers, int count, const std::function<void(int)>& body) {
    if (count == 0) return;
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string first_error;
    auto loop = [&]() {
        while (!failed.load()) {
            int i = next.fetch_add(1);
            if (i >= count) break;
            try {
                body(i);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
    if (failed.load()) throw JobError(first_error);
}

} // namespace

void atomic_write(const fs::path& path, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw JobError("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

void write_forecasts_csv(std::ostream& out, const ForecastSeries& fs) {
    out << "origin,prediction,realization,segment\n";
    for (const auto& p : fs.points) {
        out << p.origin.str() << "," << fmt(p.prediction) << "," << fmt(p.realization) << ","
            << segment_name(p.segment) << "\n";
    }
}

ForecastSeries read_forecasts_csv(std::istream& in, int horizon) {
    ForecastSeries fs;
    fs.horizon = horizon;
    std::string line;
    if (!std::getline(in, line)) throw DataError("forecasts csv: empty file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != 4) throw DataError("forecasts csv: malformed row '" + line + "'");
        ForecastPoint p;
        p.origin = parse_month(cells[0]);
        p.prediction = std::stod(cells[1]);
        p.realization = std::stod(cells[2]);
        if (cells[3] == "validation") p.segment = Segment::validation;
        else if (cells[3] == "test") p.segment = Segment::test;
        else p.segment = Segment::insample;
        fs.points.push_back(p);
    }
    return fs;
}

std::string IngestSummary::text() const {
    std::ostringstream out;
    out << "panel: " << panel_rows << " months x " << panel_cols << " predictors, " << first_date.str()
        << " .. " << last_date.str() << "\n";
    out << "missing cells: " << missing_cells;
    if (!most_missing.empty()) {
        out << " (worst:";
        for (const auto& [name, n] : most_missing) out << " " << name << "=" << n;
        out << ")";
    }
    out << "\n";
    out << "transform codes recorded: " << (transform_codes_recorded ? "yes" : "no") << "\n";
    out << "supervised rows: " << supervised_rows << ", validation windows: " << validation_windows
        << ", test windows: " << test_windows << "\n";
    out << "target preview:";
    for (const auto& [date, v] : target_preview) out << " " << date.str() << "=" << fmt_short(v);
    out << "\n";
    return out.str();
}

Runner::Runner(ExperimentConfig cfg) : cfg_(std::move(cfg)), out_(cfg_.output_dir) {
    cfg_.validate();
    config_hash_ = cfg_.hash_hex();
}

const SupervisedDataset& Runner::dataset() {
    ensure_loaded();
    return dataset_;
}

void Runner::ensure_loaded() {
    if (loaded_) return;
    panel_ = load_panel(cfg_.data_path, cfg_.data_format);
    SeriesPanel working = cfg_.predictor_transforms.empty()
                              ? panel_
                              : apply_transforms(panel_, cfg_.predictor_transforms);
    dataset_ = make_supervised(working, cfg_.target);
    cfg_.split.validate_against(dataset_);
    loaded_ = true;
}

IngestSummary Runner::ingest() {
    ensure_loaded();
    IngestSummary s;
    s.panel_rows = panel_.rows();
    s.panel_cols = panel_.cols();
    s.first_date = panel_.dates.front();
    s.last_date = panel_.dates.back();
    s.transform_codes_recorded = !panel_.transform_codes.empty();

    std::vector<std::pair<std::string, int>> per_column;
    for (int j = 0; j < panel_.cols(); ++j) {
        int n = 0;
        for (int t = 0; t < panel_.rows(); ++t)
            if (!std::isfinite(panel_.values(t, j))) ++n;
        s.missing_cells += n;
        if (n > 0) per_column.emplace_back(panel_.names[j], n);
    }
    std::sort(per_column.begin(), per_column.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    if (per_column.size() > 5) per_column.resize(5);
    s.most_missing = per_column;

    s.supervised_rows = dataset_.rows();
    auto windows = expanding_windows(dataset_, cfg_.split);
    for (const auto& w : windows) (w.is_validation ? s.validation_windows : s.test_windows) += 1;

    int n = dataset_.rows();
    for (int i = 0; i < std::min(3, n); ++i) s.target_preview.emplace_back(dataset_.target_date(i), dataset_.targets(i));
    for (int i = std::max(3, n - 3); i < n; ++i) s.target_preview.emplace_back(dataset_.target_date(i), dataset_.targets(i));

    json j;
    j["config_hash"] = config_hash_;
    j["panel"] = {{"rows", s.panel_rows}, {"cols", s.panel_cols},
                  {"first", s.first_date.str()}, {"last", s.last_date.str()}};
    j["missing_cells"] = s.missing_cells;
    j["supervised_rows"] = s.supervised_rows;
    j["validation_windows"] = s.validation_windows;
    j["test_windows"] = s.test_windows;
    atomic_write(out_ / "ingest_summary.json", j.dump(2) + "\n");
    append_provenance({"ingest: missing predictor cells are imputed with the training-window mean "
                       "(zero after standardization)"});
    return s;
}

void Runner::dump_standardized(const fs::path& path) {
    ensure_loaded();
    MonthDate window_end = cfg_.split.t3.plus_months(-cfg_.split.horizon);
    StandardizedWindow sw = standardize(dataset_, window_end);
    std::ostringstream out;
    out << "origin,target";
    for (int col : sw.kept_columns) out << "," << dataset_.feature_names[col];
    out << "\n";
    for (int i = 0; i < sw.features.rows(); ++i) {
        out << dataset_.origins[i].str() << "," << fmt(dataset_.targets(i));
        for (int c = 0; c < sw.features.cols(); ++c) out << "," << fmt(sw.features(i, c));
        out << "\n";
    }
    atomic_write(path, out.str());
    if (!sw.dropped.empty()) {
        std::string line = "standardized dump: dropped zero-variance columns:";
        for (const auto& name : sw.dropped) line += " " + name;
        append_provenance({line});
    }
}

void Runner::emit_transforms(const fs::path& path) {
    ensure_loaded();
    auto map = transforms_from_codes(panel_);
    if (map.empty()) throw DataError("panel has no recorded transform codes to emit");
    json j(map);
    atomic_write(path, j.dump(2) + "\n");
}

fs::path Runner::job_dir(const std::string& id) const { return out_ / "jobs" / id; }

Runner::RecJob Runner::make_job(const Architecture& arch, double lambda, const LossSpec& loss) const {
    RecJob job;
    job.arch = arch;
    job.lambda = lambda;
    job.loss = loss;
    std::string tau_part = loss.kind == LossKind::mse ? "mse" : "pin" + fmt_short(loss.tau);
    job.key = "rec/" + arch.label() + "/l" + fmt_short(lambda) + "/" + tau_part;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(config_hash_ + ":" + job.key)));
    job.id = buf;
    return job;
}

const ForecastSeries* Runner::job_forecasts(const RecJob& job) {
    known_jobs_.emplace(job.id, job);
    auto cached = forecast_cache_.find(job.id);
    if (cached != forecast_cache_.end()) return &cached->second;

    fs::path dir = job_dir(job.id);
    fs::path meta_path = dir / "meta.json";
    fs::path fc_path = dir / "forecasts.csv";
    if (!fs::exists(meta_path) || !fs::exists(fc_path)) return nullptr;
    try {
        json meta = json::parse(read_file(meta_path));
        if (meta.value("config_hash", "") != config_hash_) return nullptr;
        if (meta.value("status", "") != "done") return nullptr;
        std::ifstream in(fc_path);
        ForecastSeries fs = read_forecasts_csv(in, cfg_.split.horizon);
        auto [it, ok] = forecast_cache_.emplace(job.id, std::move(fs));
        (void)ok;
        return &it->second;
    } catch (const std::exception&) {
        return nullptr; // treat unreadable artifacts as absent; job will rerun
    }
}

void Runner::execute_jobs(const std::vector<RecJob>& jobs) {
    ensure_loaded();
    std::vector<const RecJob*> pending;
    std::set<std::string> queued; // several grid points can share a representative
    for (const auto& job : jobs) {
        known_jobs_.emplace(job.id, job);
        if (job_forecasts(job) == nullptr && queued.insert(job.id).second) pending.push_back(&job);
    }
    if (pending.empty()) return;

    std::mutex sink_mutex;
    std::vector<std::string> provenance;

    parallel_run(cfg_.jobs, static_cast<int>(pending.size()), [&](int idx) {
        const RecJob& job = *pending[idx];
        TrainConfig tc = cfg_.train_config_for(job.arch.depth);
        fs::path dir = job_dir(job.id);
        fs::create_directories(dir);

        std::vector<int> last_inactive{-1};
        std::vector<std::string> local_log;
        Checkpoint final_ck;
        bool have_ck = false;
        CheckpointHook hook = [&](const Checkpoint& ck) {
            auto inactive = ck.scaler.inactive_columns();
            if (inactive != last_inactive) {
                std::string line = "job " + job.id + " (" + job.key + ") origin " + ck.origin.str() + ": " +
                                   std::to_string(inactive.size()) + " zero-variance column(s) zeroed";
                for (size_t i = 0; i < inactive.size() && i < 8; ++i)
                    line += (i ? "," : ":") + std::string(" ") + dataset_.feature_names[inactive[i]];
                local_log.push_back(line);
                last_inactive = inactive;
            }
            if (cfg_.checkpoint_every_origin) {
                std::ostringstream ss;
                save_checkpoint(ss, ck);
                atomic_write(dir / "checkpoints" / (ck.origin.str() + ".txt"), ss.str());
            }
            final_ck = ck;
            have_ck = true;
        };

        ForecastSeries fc =
            recursive_forecast(dataset_, cfg_.split, job.arch, job.lambda, job.loss, tc, job.key, hook);

        std::ostringstream fc_text;
        write_forecasts_csv(fc_text, fc);
        atomic_write(dir / "forecasts.csv", fc_text.str());
        if (have_ck) {
            std::ostringstream ck_text;
            save_checkpoint(ck_text, final_ck);
            atomic_write(dir / "checkpoint_final.txt", ck_text.str());
        }

        json meta;
        meta["config_hash"] = config_hash_;
        meta["key"] = job.key;
        meta["status"] = "done";
        meta["arch"] = {{"depth", job.arch.depth}, {"widths", job.arch.widths},
                        {"alphas", job.arch.alphas}, {"input_dim", job.arch.input_dim}};
        meta["lambda"] = job.lambda;
        meta["loss"] = job.loss.label();
        meta["horizon"] = cfg_.split.horizon;
        atomic_write(dir / "meta.json", meta.dump(2) + "\n");

        std::lock_guard<std::mutex> lock(sink_mutex);
        forecast_cache_[job.id] = std::move(fc);
        executed_.push_back(job.id);
        for (auto& line : local_log) provenance.push_back(std::move(line));
    });

    append_provenance(provenance);
}

namespace {

fs::path records_path(const fs::path& out, const LossSpec& loss) {
    return out / "complexity" / ("records_" + loss.label() + ".csv");
}

} // namespace

std::vector<ComplexityRecord> Runner::complexity_records(const LossSpec& loss, bool compute_if_missing) {
    ensure_loaded();
    fs::path path = records_path(out_, loss);
    fs::path meta_path = path;
    meta_path += ".meta";

    if (fs::exists(path) && fs::exists(meta_path)) {
        try {
            json meta = json::parse(read_file(meta_path));
            if (meta.value("config_hash", "") == config_hash_) {
                std::vector<ComplexityRecord> records;
                std::istringstream in(read_file(path));
                std::string line;
                std::getline(in, line); // header
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    auto cells = split(line, ',');
                    if (cells.size() < 6) throw DataError("records csv: malformed row");
                    ComplexityRecord rec;
                    int depth = std::stoi(cells[0]);
                    if (depth == 0) {
                        rec.arch = Architecture::affine(dataset_.cols());
                    } else {
                        std::vector<int> widths;
                        for (const auto& w : split(cells[1], '|')) widths.push_back(std::stoi(w));
                        rec.arch = Architecture::hidden(dataset_.cols(), widths, std::stod(cells[2]));
                    }
                    rec.lambda = std::stod(cells[3]);
                    rec.var0 = std::stod(cells[4]);
                    rec.r = std::stod(cells[5]);
                    records.push_back(std::move(rec));
                }
                if (!records.empty()) return records;
            }
        } catch (const std::exception&) {
            // fall through to recompute
        }
    }

    if (!compute_if_missing) {
        throw JobError("missing complexity records for " + loss.label() +
                       " (run --stage complexity first): " + path.string());
    }

    std::vector<CandidateSpec> candidates;
    for (int depth : cfg_.depths) {
        std::vector<Architecture> archs;
        if (depth == 0) {
            archs.push_back(Architecture::affine(dataset_.cols()));
        } else {
            for (int width : cfg_.widths)
                for (double alpha : cfg_.alphas)
                    archs.push_back(Architecture::hidden(dataset_.cols(), std::vector<int>(depth, width), alpha));
        }
        for (const auto& arch : archs)
            for (double lambda : cfg_.lambda_grid()) candidates.push_back(CandidateSpec{arch, lambda});
    }

    std::vector<std::string> log;
    TrainConfig tc = cfg_.train_config_for(*std::max_element(cfg_.depths.begin(), cfg_.depths.end()));
    auto records = complexity_index(candidates, dataset_, cfg_.split, loss, tc, cfg_.jobs, &log);
    append_provenance(log);

    auto assignments = map_complexity_grid(records, complexity_grid());
    std::vector<std::string> assigned(records.size());
    for (const auto& a : assignments) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.1f", a.r_target);
        auto& slot = assigned[a.record_index];
        slot += (slot.empty() ? "" : ";") + std::string(buf);
    }

    std::ostringstream csv;
    csv << "depth,widths,alpha,lambda,var0,r,grid_assignment\n";
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        csv << rec.arch.depth << "," << widths_text(rec.arch) << ","
            << (rec.arch.depth > 0 ? fmt_short(rec.arch.alphas[0]) : "") << "," << fmt(rec.lambda) << ","
            << fmt(rec.var0) << "," << fmt(rec.r) << "," << assigned[i] << "\n";
    }
    atomic_write(path, csv.str());
    json meta;
    meta["config_hash"] = config_hash_;
    meta["loss"] = loss.label();
    atomic_write(meta_path, meta.dump(2) + "\n");
    return records;
}

void Runner::run_complexity() {
    for (double tau : cfg_.quantiles) complexity_records(LossSpec::pinball(tau), true);
    write_manifest();
}

namespace {

struct TauPlan {
    LossSpec loss;
    std::vector<ComplexityRecord> records;
    std::vector<GridAssignment> assignments;
};

} // namespace

void Runner::run_validate() {
    ensure_loaded();

    if (cfg_.profile == GridProfile::complexity) {
        std::vector<TauPlan> plans;
        std::vector<RecJob> jobs;
        for (double tau : cfg_.quantiles) {
            TauPlan plan;
            plan.loss = LossSpec::pinball(tau);
            plan.records = complexity_records(plan.loss, true);
            plan.assignments = map_complexity_grid(plan.records, complexity_grid());
            for (const auto& a : plan.assignments) {
                if (a.r_target == 0.0) continue; // naive row, no training job
                const auto& rec = plan.records[a.record_index];
                jobs.push_back(make_job(rec.arch, rec.lambda, plan.loss));
            }
            plans.push_back(std::move(plan));
        }
        execute_jobs(jobs);

        std::ostringstream ledger;
        ledger << "loss,r,depth,widths,alpha,lambda,validation_score,test_score,status\n";
        json selection;
        selection["config_hash"] = config_hash_;
        selection["profile"] = "complexity";
        selection["per_quantile"] = json::array();

        std::vector<double> shared_scores(complexity_grid().size(), 0.0);
        for (auto& plan : plans) {
            ForecastSeries naive = naive_forecast(dataset_, cfg_.split, plan.loss.tau);
            std::vector<const ForecastSeries*> per_point;
            for (const auto& a : plan.assignments) {
                if (a.r_target == 0.0) {
                    per_point.push_back(&naive);
                    continue;
                }
                const auto& rec = plan.records[a.record_index];
                per_point.push_back(job_forecasts(make_job(rec.arch, rec.lambda, plan.loss)));
            }
            std::vector<LedgerRow> rows;
            ComplexityChoice choice = select_complexity(plan.assignments, plan.records, per_point,
                                                        plan.loss, &rows);
            for (size_t i = 0; i < rows.size(); ++i) {
                const auto& rec = plan.records[plan.assignments[i].record_index];
                char rbuf[16];
                std::snprintf(rbuf, sizeof(rbuf), "%.1f", plan.assignments[i].r_target);
                ledger << plan.loss.label() << "," << rbuf << "," << rec.arch.depth << ","
                       << widths_text(rec.arch) << ","
                       << (rec.arch.depth > 0 ? fmt_short(rec.arch.alphas[0]) : "") << ","
                       << fmt(rec.lambda) << "," << fmt(rows[i].validation) << ",," << rows[i].status
                       << "\n";
                double weight = 1.0 / (plan.loss.tau * (1.0 - plan.loss.tau));
                shared_scores[i] += rows[i].validation * weight;
            }
            const auto& best = plan.records[plan.assignments[choice.assignment_index].record_index];
            json entry;
            entry["tau"] = plan.loss.tau;
            entry["r_hat"] = choice.r_hat;
            entry["depth"] = best.arch.depth;
            entry["widths"] = best.arch.widths;
            entry["alpha"] = best.arch.depth > 0 ? best.arch.alphas[0] : 1.0;
            entry["lambda"] = best.lambda;
            entry["validation_score"] = choice.score;
            selection["per_quantile"].push_back(entry);
        }

        if (cfg_.shared_architecture) {
            size_t best = 0;
            for (size_t i = 1; i < shared_scores.size(); ++i)
                if (shared_scores[i] < shared_scores[best]) best = i;
            selection["shared_r_hat"] = complexity_grid()[best];
        }

        atomic_write(out_ / "ledger.csv", ledger.str());
        atomic_write(out_ / "selection.json", selection.dump(2) + "\n");
        write_manifest();
        return;
    }

    // raw Table-1 style grid
    HyperGrid grid;
    grid.depths = cfg_.depths;
    grid.widths = cfg_.widths;
    grid.alphas = cfg_.alphas;
    grid.lambdas = cfg_.lambda_grid();
    for (double tau : cfg_.quantiles) grid.losses.push_back(LossSpec::pinball(tau));
    if (cfg_.include_mse) grid.losses.push_back(LossSpec::mse());

    auto entries = enumerate_grid(grid, dataset_.cols());
    std::vector<RecJob> jobs;
    for (const auto& loss : grid.losses)
        for (const auto& e : entries) jobs.push_back(make_job(e.arch, e.lambda, loss));
    execute_jobs(jobs);

    std::ostringstream ledger;
    ledger << "loss,r,depth,widths,alpha,lambda,validation_score,test_score,status\n";
    json selection;
    selection["config_hash"] = config_hash_;
    selection["profile"] = "table1";
    selection["per_quantile"] = json::array();

    for (const auto& loss : grid.losses) {
        std::map<std::string, const ForecastSeries*> by_key;
        for (const auto& e : entries) {
            by_key[e.key()] = job_forecasts(make_job(e.arch, e.lambda, loss));
        }
        std::vector<LedgerRow> rows;
        Selection best = select_hyperparams(entries, by_key, loss, &rows);
        for (const auto& row : rows) {
            ledger << loss.label() << ",," << row.entry.arch.depth << "," << widths_text(row.entry.arch)
                   << "," << (row.entry.arch.depth > 0 ? fmt_short(row.entry.arch.alphas[0]) : "") << ","
                   << fmt(row.entry.lambda) << "," << fmt(row.validation) << ",," << row.status << "\n";
        }
        json entry;
        entry["loss"] = loss.label();
        if (loss.kind == LossKind::pinball) entry["tau"] = loss.tau;
        entry["depth"] = best.entry.arch.depth;
        entry["widths"] = best.entry.arch.widths;
        entry["alpha"] = best.entry.arch.depth > 0 ? best.entry.arch.alphas[0] : 1.0;
        entry["lambda"] = best.entry.lambda;
        entry["validation_score"] = best.score;
        selection["per_quantile"].push_back(entry);
    }

    if (cfg_.shared_architecture) {
        // one architecture across quantiles: minimize the sum of
        // tau(1-tau)-normalized validation scores over the pinball losses
        std::map<std::string, double> shared_score;
        for (const auto& loss : grid.losses) {
            if (loss.kind != LossKind::pinball) continue;
            double weight = 1.0 / (loss.tau * (1.0 - loss.tau));
            for (const auto& e : entries) {
                const ForecastSeries* fc = job_forecasts(make_job(e.arch, e.lambda, loss));
                shared_score[e.key()] += weight * validation_score(*fc, loss);
            }
        }
        const GridEntry* best = nullptr;
        double best_score = 0.0;
        for (const auto& e : entries) {
            double s = shared_score[e.key()];
            if (!best || s < best_score) {
                best = &e;
                best_score = s;
            }
        }
        json shared;
        shared["depth"] = best->arch.depth;
        shared["widths"] = best->arch.widths;
        shared["alpha"] = best->arch.depth > 0 ? best->arch.alphas[0] : 1.0;
        shared["lambda"] = best->lambda;
        shared["weighted_validation_score"] = best_score;
        selection["shared"] = shared;
    }

    atomic_write(out_ / "ledger.csv", ledger.str());
    atomic_write(out_ / "selection.json", selection.dump(2) + "\n");
    write_manifest();
}

void Runner::run_seed_dispersion(int replicates) {
    ensure_loaded();
    if (replicates < 2) throw ConfigError("seed dispersion needs at least 2 replicates");
    fs::path sel_path = out_ / "selection.json";
    if (!fs::exists(sel_path)) {
        throw JobError("seed dispersion requires validation artifacts; missing " + sel_path.string());
    }
    json selection = json::parse(read_file(sel_path));

    std::ostringstream csv;
    csv << "loss,replicate,seed,validation_score,test_score\n";
    std::ostringstream summary;
    for (const auto& entry : selection["per_quantile"]) {
        if (entry.value("loss", "") == "mse") continue;
        double tau = entry["tau"].get<double>();
        LossSpec loss = LossSpec::pinball(tau);
        if (cfg_.profile == GridProfile::complexity && entry["r_hat"].get<double>() == 0.0) {
            continue; // naive benchmark carries no seed
        }
        Architecture arch;
        int depth = entry["depth"].get<int>();
        if (depth == 0) {
            arch = Architecture::affine(dataset_.cols());
        } else {
            arch = Architecture::hidden(dataset_.cols(), entry["widths"].get<std::vector<int>>(),
                                        entry["alpha"].get<double>());
        }
        double lambda = entry["lambda"].get<double>();

        std::vector<double> val_scores(replicates), test_scores(replicates);
        parallel_run(cfg_.jobs, replicates, [&](int rep) {
            TrainConfig tc = cfg_.train_config_for(arch.depth);
            tc.seed = cfg_.seed + static_cast<std::uint64_t>(rep);
            ForecastSeries fc = recursive_forecast(dataset_, cfg_.split, arch, lambda, loss, tc,
                                                   "dispersion/" + loss.label());
            val_scores[rep] = validation_score(fc, loss);
            double tsum = 0.0;
            int tn = 0;
            for (const auto& p : fc.points) {
                if (p.segment != Segment::test) continue;
                tsum += loss_value(loss, p.realization, p.prediction);
                ++tn;
            }
            test_scores[rep] = tn ? tsum / tn : 0.0;
        });

        auto sd = [](const std::vector<double>& v) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= v.size();
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            return v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
        };
        for (int rep = 0; rep < replicates; ++rep) {
            csv << loss.label() << "," << rep << "," << (cfg_.seed + rep) << ","
                << fmt(val_scores[rep]) << "," << fmt(test_scores[rep]) << "\n";
        }
        summary << loss.label() << ",sd," << fmt(sd(val_scores)) << "," << fmt(sd(test_scores)) << "\n";
    }
    csv << "loss,stat,validation_sd,test_sd\n" << summary.str();
    atomic_write(out_ / "seed_dispersion.csv", csv.str());
}

void Runner::run_test() {
    ensure_loaded();
    fs::path sel_path = out_ / "selection.json";
    if (!fs::exists(sel_path)) {
        throw JobError("test stage requires validation artifacts; missing " + sel_path.string() +
                       " (run --stage validate first)");
    }
    json selection = json::parse(read_file(sel_path));
    if (selection.value("config_hash", "") != config_hash_) {
        throw JobError("selection.json belongs to a different config (hash mismatch); rerun validate");
    }

    render_tables_and_ledger();

    if (cfg_.profile == GridProfile::complexity) {
        auto grid = complexity_grid();
        std::vector<TauPlan> plans;
        for (double tau : cfg_.quantiles) {
            TauPlan plan;
            plan.loss = LossSpec::pinball(tau);
            plan.records = complexity_records(plan.loss, false);
            plan.assignments = map_complexity_grid(plan.records, grid);
            plans.push_back(std::move(plan));
        }

        // fan chart from the per-quantile selected representatives
        std::vector<const ForecastSeries*> selected;
        for (size_t c = 0; c < plans.size(); ++c) {
            const json& entry = selection["per_quantile"][c];
            double r_hat = entry["r_hat"].get<double>();
            if (r_hat == 0.0) {
                auto [it, ok] = forecast_cache_.emplace(
                    "naive_" + plans[c].loss.label(), naive_forecast(dataset_, cfg_.split, plans[c].loss.tau));
                (void)ok;
                selected.push_back(&it->second);
                continue;
            }
            size_t r_index = grid.size();
            for (size_t r = 0; r < grid.size(); ++r)
                if (std::abs(grid[r] - r_hat) < 1e-9) r_index = r;
            if (r_index == grid.size()) throw JobError("selection.json r_hat not on the complexity grid");
            const auto& rec = plans[c].records[plans[c].assignments[r_index].record_index];
            selected.push_back(job_forecasts(make_job(rec.arch, rec.lambda, plans[c].loss)));
        }
        FanChart chart = build_fanchart(cfg_.quantiles, selected, false);
        std::ostringstream fan;
        write_fanchart_csv(fan, chart);
        atomic_write(out_ / "fanchart.csv", fan.str());
        write_manifest();
        return;
    }

    // table1 profile: evaluate the frozen selection out of sample
    json test_summary;
    test_summary["config_hash"] = config_hash_;
    test_summary["per_quantile"] = json::array();
    std::vector<const ForecastSeries*> selected;

    for (const auto& entry : selection["per_quantile"]) {
        if (entry.value("loss", "") == "mse") continue;
        double tau = entry["tau"].get<double>();
        LossSpec loss = LossSpec::pinball(tau);
        Architecture arch;
        int depth = entry["depth"].get<int>();
        if (depth == 0) {
            arch = Architecture::affine(dataset_.cols());
        } else {
            arch = Architecture::hidden(dataset_.cols(), entry["widths"].get<std::vector<int>>(),
                                        entry["alpha"].get<double>());
        }
        const ForecastSeries* fc = job_forecasts(make_job(arch, entry["lambda"].get<double>(), loss));
        if (!fc) throw JobError("selected configuration's forecasts missing for tau " + fmt_short(tau));
        double tsum = 0.0;
        int tn = 0;
        for (const auto& p : fc->points) {
            if (p.segment != Segment::test) continue;
            tsum += loss_value(loss, p.realization, p.prediction);
            ++tn;
        }
        json row = entry;
        row["test_score"] = tn ? tsum / tn : 0.0;
        test_summary["per_quantile"].push_back(row);
        selected.push_back(fc);
    }

    atomic_write(out_ / "selection_test.json", test_summary.dump(2) + "\n");
    if (selected.size() == cfg_.quantiles.size()) {
        FanChart chart = build_fanchart(cfg_.quantiles, selected, false);
        std::ostringstream fan;
        write_fanchart_csv(fan, chart);
        atomic_write(out_ / "fanchart.csv", fan.str());
    }
    write_manifest();
}

void Runner::render_tables_and_ledger() {
    ensure_loaded();

    if (cfg_.profile == GridProfile::complexity) {
        auto grid = complexity_grid();
        std::vector<TauPlan> plans;
        std::string missing;
        for (double tau : cfg_.quantiles) {
            TauPlan plan;
            plan.loss = LossSpec::pinball(tau);
            plan.records = complexity_records(plan.loss, false);
            plan.assignments = map_complexity_grid(plan.records, grid);
            plans.push_back(std::move(plan));
        }

        // Table rows: r = 0.0 handled by build_table; others from rep jobs.
        CellForecasts per_cell(grid.size(),
                               std::vector<const ForecastSeries*>(cfg_.quantiles.size(), nullptr));
        for (size_t c = 0; c < plans.size(); ++c) {
            for (size_t r = 0; r < grid.size(); ++r) {
                if (grid[r] == 0.0) continue;
                const auto& rec = plans[c].records[plans[c].assignments[r].record_index];
                const ForecastSeries* fc = job_forecasts(make_job(rec.arch, rec.lambda, plans[c].loss));
                if (!fc) {
                    char buf[48];
                    std::snprintf(buf, sizeof(buf), "r=%.1f %s", grid[r], plans[c].loss.label().c_str());
                    missing += (missing.empty() ? "" : ", ") + std::string(buf);
                }
                per_cell[r][c] = fc;
            }
        }
        if (!missing.empty()) {
            throw JobError("missing recursive forecasts for: " + missing +
                           " (run --stage validate first)");
        }

        auto windows = expanding_windows(dataset_, cfg_.split);
        int test_n = 0;
        for (const auto& w : windows) test_n += w.is_validation ? 0 : 1;
        int lags = cfg_.hac_lags(test_n);

        LossTable validation_table = build_table(dataset_, cfg_.split, Segment::validation, grid,
                                                 cfg_.quantiles, per_cell, lags, cfg_.scale);
        LossTable test_table = build_table(dataset_, cfg_.split, Segment::test, grid, cfg_.quantiles,
                                           per_cell, lags, cfg_.scale);
        std::ostringstream vcsv, tcsv;
        write_table_csv(vcsv, validation_table);
        write_table_csv(tcsv, test_table);
        atomic_write(out_ / "tables" / "table_validation.csv", vcsv.str());
        atomic_write(out_ / "tables" / "table_test.csv", tcsv.str());
        atomic_write(out_ / "tables" / "table_validation.json", table_to_json(validation_table) + "\n");
        atomic_write(out_ / "tables" / "table_test.json", table_to_json(test_table) + "\n");

        std::ostringstream ledger;
        ledger << "loss,r,depth,widths,alpha,lambda,validation_score,test_score,status\n";
        for (size_t c = 0; c < plans.size(); ++c) {
            ForecastSeries naive = naive_forecast(dataset_, cfg_.split, plans[c].loss.tau);
            for (size_t r = 0; r < grid.size(); ++r) {
                const ForecastSeries* fc = grid[r] == 0.0 ? &naive : per_cell[r][c];
                const auto& rec = plans[c].records[plans[c].assignments[r].record_index];
                double vscore = validation_score(*fc, plans[c].loss);
                double tsum = 0.0;
                int tn = 0;
                for (const auto& p : fc->points) {
                    if (p.segment != Segment::test) continue;
                    tsum += loss_value(plans[c].loss, p.realization, p.prediction);
                    ++tn;
                }
                char rbuf[16];
                std::snprintf(rbuf, sizeof(rbuf), "%.1f", grid[r]);
                ledger << plans[c].loss.label() << "," << rbuf << "," << rec.arch.depth << ","
                       << widths_text(rec.arch) << ","
                       << (rec.arch.depth > 0 ? fmt_short(rec.arch.alphas[0]) : "") << ","
                       << fmt(rec.lambda) << "," << fmt(vscore) << "," << fmt(tn ? tsum / tn : 0.0)
                       << ",ok\n";
            }
        }
        atomic_write(out_ / "ledger.csv", ledger.str());
        return;
    }

    // table1 profile: ledger with validation and test scores per entry
    HyperGrid grid;
    grid.depths = cfg_.depths;
    grid.widths = cfg_.widths;
    grid.alphas = cfg_.alphas;
    grid.lambdas = cfg_.lambda_grid();
    for (double tau : cfg_.quantiles) grid.losses.push_back(LossSpec::pinball(tau));
    if (cfg_.include_mse) grid.losses.push_back(LossSpec::mse());
    auto entries = enumerate_grid(grid, dataset_.cols());

    std::ostringstream ledger;
    ledger << "loss,r,depth,widths,alpha,lambda,validation_score,test_score,status\n";
    std::string missing;
    for (const auto& loss : grid.losses) {
        for (const auto& e : entries) {
            const ForecastSeries* fc = job_forecasts(make_job(e.arch, e.lambda, loss));
            if (!fc) {
                missing += (missing.empty() ? "" : ", ") + e.key() + "/" + loss.label();
                continue;
            }
            double vscore = validation_score(*fc, loss);
            double tsum = 0.0;
            int tn = 0;
            for (const auto& p : fc->points) {
                if (p.segment != Segment::test) continue;
                tsum += loss_value(loss, p.realization, p.prediction);
                ++tn;
            }
            ledger << loss.label() << ",," << e.arch.depth << "," << widths_text(e.arch) << ","
                   << (e.arch.depth > 0 ? fmt_short(e.arch.alphas[0]) : "") << "," << fmt(e.lambda)
                   << "," << fmt(vscore) << "," << fmt(tn ? tsum / tn : 0.0) << ",ok\n";
        }
    }
    if (!missing.empty()) {
        throw JobError("missing recursive forecasts for: " + missing + " (run --stage validate first)");
    }
    atomic_write(out_ / "ledger.csv", ledger.str());
}

void Runner::run(RunStage stage) {
    switch (stage) {
        case RunStage::complexity:
            run_complexity();
            break;
        case RunStage::validate:
            run_validate();
            break;
        case RunStage::test:
            run_test();
            break;
        case RunStage::full:
            if (cfg_.profile == GridProfile::complexity) run_complexity();
            run_validate();
            run_test();
            break;
    }
}

void Runner::report(ReportKind kind, bool sort_quantiles) {
    ensure_loaded();
    switch (kind) {
        case ReportKind::table: {
            if (cfg_.profile != GridProfile::complexity) {
                throw JobError("report table: loss tables require the complexity grid profile");
            }
            render_tables_and_ledger();
            break;
        }
        case ReportKind::ledger: {
            render_tables_and_ledger();
            break;
        }
        case ReportKind::fanchart: {
            fs::path sel_path = out_ / "selection.json";
            if (!fs::exists(sel_path)) {
                throw JobError("report fanchart: missing " + sel_path.string() +
                               " (run --stage validate first)");
            }
            json selection = json::parse(read_file(sel_path));
            std::vector<const ForecastSeries*> selected;
            std::string missing;
            for (const auto& entry : selection["per_quantile"]) {
                if (entry.value("loss", "") == "mse") continue;
                double tau = entry["tau"].get<double>();
                LossSpec loss = LossSpec::pinball(tau);
                if (cfg_.profile == GridProfile::complexity && entry["r_hat"].get<double>() == 0.0) {
                    auto [it, ok] = forecast_cache_.emplace(
                        "naive_" + loss.label(), naive_forecast(dataset_, cfg_.split, tau));
                    (void)ok;
                    selected.push_back(&it->second);
                    continue;
                }
                Architecture arch;
                int depth = entry["depth"].get<int>();
                if (depth == 0) {
                    arch = Architecture::affine(dataset_.cols());
                } else {
                    arch = Architecture::hidden(dataset_.cols(), entry["widths"].get<std::vector<int>>(),
                                                entry["alpha"].get<double>());
                }
                const ForecastSeries* fc = job_forecasts(make_job(arch, entry["lambda"].get<double>(), loss));
                if (!fc) missing += (missing.empty() ? "" : ", ") + loss.label();
                else selected.push_back(fc);
            }
            if (!missing.empty()) {
                throw JobError("report fanchart: missing forecasts for " + missing);
            }
            FanChart chart = build_fanchart(cfg_.quantiles, selected, sort_quantiles);
            std::ostringstream fan;
            write_fanchart_csv(fan, chart);
            atomic_write(out_ / (sort_quantiles ? "fanchart_sorted.csv" : "fanchart.csv"), fan.str());
            break;
        }
    }
}

void Runner::write_manifest() {
    json m;
    m["config_hash"] = config_hash_;
    m["seed"] = cfg_.seed;
    m["config"] = json::parse(cfg_.canonical_text());
    json jobs = json::object();
    for (const auto& [id, job] : known_jobs_) {
        json entry;
        entry["key"] = job.key;
        entry["arch"] = {{"depth", job.arch.depth}, {"widths", job.arch.widths},
                         {"alphas", job.arch.alphas}};
        entry["lambda"] = job.lambda;
        entry["loss"] = job.loss.label();
        entry["dir"] = (fs::path("jobs") / id).generic_string();
        entry["forecasts"] = (fs::path("jobs") / id / "forecasts.csv").generic_string();
        entry["checkpoint_final"] = (fs::path("jobs") / id / "checkpoint_final.txt").generic_string();
        if (cfg_.checkpoint_every_origin) {
            entry["checkpoints_dir"] = (fs::path("jobs") / id / "checkpoints").generic_string();
        }
        entry["status"] = job_forecasts(job) ? "done" : "pending";
        jobs[id] = entry;
    }
    m["jobs"] = jobs;
    m["executed_last_run"] = executed_;
    atomic_write(out_ / "manifest.json", m.dump(2) + "\n");
}

void Runner::append_provenance(const std::vector<std::string>& lines) {
    if (lines.empty()) return;
    fs::create_directories(out_);
    std::ofstream out(out_ / "provenance.log", std::ios::app);
    for (const auto& line : lines) out << line << "\n";
}

} // namespace macroq
