#include "memlabel/labeling_service.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "memlabel/error.hpp"
#include "memlabel/text.hpp"

namespace memlabel {

namespace fs = std::filesystem;

std::vector<std::optional<ClassIndex>> OracleProvider::label(std::span<const LabelQuery> batch) {
    std::vector<std::optional<ClassIndex>> out;
    out.reserve(batch.size());
    for (const auto& q : batch) {
        if (!gt_.contains(q.sample_id)) throw ValidationError("oracle has no label for sample '" + q.sample_id + "'");
        out.emplace_back(gt_.at(q.sample_id));
    }
    return out;
}

GroundTruth flip_labels(const GroundTruth& gt, const Dataset& ds, const LabelSpace& space, double rate,
                        std::int64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw ConfigError("label flip rate must be in [0, 1]");
    const auto s = static_cast<std::uint64_t>(seed);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32), 0xf11bu};
    std::mt19937_64 rng(seq);
    std::bernoulli_distribution flip(rate);
    std::uniform_int_distribution<ClassIndex> other(0, static_cast<ClassIndex>(space.size()) - 2);

    auto labels = gt.labels();
    for (const auto& sample : ds.samples()) {
        const auto it = labels.find(sample.id);
        if (it == labels.end()) continue;
        // two draws per sample whatever the outcome, keeping the stream aligned with dataset order
        const bool f = flip(rng);
        const ClassIndex o = other(rng);
        if (f) it->second = o >= it->second ? o + 1 : o;
    }
    return GroundTruth(ds, space, std::move(labels));
}

std::string_view to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::open: return "open";
        case SessionStatus::complete: return "complete";
        case SessionStatus::aborted: return "aborted";
    }
    return "?";
}

namespace {

constexpr const char* kSessionFile = "session.txt";
constexpr const char* kJournalFile = "journal.csv";
constexpr const char* kJournalHeader = "query_id,sample_id,seed,class_index,timestamp";

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Complete lines of a file. A trailing fragment without a newline is cut
/// from the file itself so later appends start on a fresh line.
std::vector<std::string> read_complete_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto last_nl = all.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != all.size()) {
        fs::resize_file(path, keep);
        all.resize(keep);
    }
    std::vector<std::string> lines;
    std::istringstream ss(all);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

bool valid_token(const std::string& s) {
    return !s.empty() && s.find_first_of(" ,\t\r\n") == std::string::npos;
}

}  // namespace

LabelSession::LabelSession(std::string dir, std::string id, LabelSpace space, std::size_t max_labels)
    : dir_(std::move(dir)), id_(std::move(id)), space_(std::move(space)), max_labels_(max_labels) {}

LabelSession::~LabelSession() {
    if (session_file_) std::fclose(session_file_);
    if (journal_file_) std::fclose(journal_file_);
}

void LabelSession::append(std::FILE* f, const std::string& line) {
    if (std::fwrite(line.data(), 1, line.size(), f) != line.size() || std::fflush(f) != 0 || ::fsync(fileno(f)) != 0)
        throw Error("session " + id_ + ": failed to persist to " + dir_);
}

std::unique_ptr<LabelSession> LabelSession::open(const std::string& dir, const std::string& id,
                                                 const LabelSpace& space, std::size_t max_labels) {
    if (!valid_token(id)) throw ConfigError("session id must be a non-empty token without spaces or commas");
    for (const auto& c : space.classes())
        if (c.find_first_of(",\r\n") != std::string::npos) throw ConfigError("class names may not contain commas");
    fs::create_directories(dir);
    const auto session_path = (fs::path(dir) / kSessionFile).string();
    if (fs::exists(session_path) && fs::file_size(session_path) > 0) {
        auto s = open_existing(dir);
        if (s->id_ != id || s->space_.classes() != space.classes() || s->max_labels_ != max_labels)
            throw ValidationError("session directory " + dir + " holds a different session (id " + s->id_ + ")");
        return s;
    }
    std::unique_ptr<LabelSession> s(new LabelSession(dir, id, space, max_labels));
    s->session_file_ = std::fopen(session_path.c_str(), "wb");
    if (!s->session_file_) throw Error("cannot create " + session_path);
    std::string header = "memlabel-session id=" + id + " n_l=" + std::to_string(max_labels) + "\n";
    for (const auto& c : space.classes()) header += "class," + c + "\n";
    s->append(s->session_file_, header);

    const auto journal_path = (fs::path(dir) / kJournalFile).string();
    s->journal_file_ = std::fopen(journal_path.c_str(), "wb");
    if (!s->journal_file_) throw Error("cannot create " + journal_path);
    s->append(s->journal_file_, std::string(kJournalHeader) + "\n");
    return s;
}

std::unique_ptr<LabelSession> LabelSession::open_existing(const std::string& dir) {
    const auto session_path = (fs::path(dir) / kSessionFile).string();
    const auto lines = read_complete_lines(session_path);
    if (lines.empty()) throw ValidationError("no session in " + dir);

    std::string id;
    std::optional<std::int64_t> n_l;
    for (const auto field : text::split(lines[0], ' ')) {
        if (field.rfind("id=", 0) == 0) id = std::string(field.substr(3));
        if (field.rfind("n_l=", 0) == 0) n_l = text::parse_int(field.substr(4));
    }
    if (lines[0].rfind("memlabel-session", 0) != 0 || id.empty() || !n_l || *n_l < 0)
        throw ParseError(session_path, 1, "bad session header");
    std::vector<std::string> classes;
    for (std::size_t ln = 1; ln < lines.size(); ++ln)
        if (lines[ln].rfind("class,", 0) == 0) classes.push_back(lines[ln].substr(6));

    std::unique_ptr<LabelSession> s(new LabelSession(dir, id, LabelSpace(std::move(classes)),
                                                     static_cast<std::size_t>(*n_l)));
    s->replay();
    s->session_file_ = std::fopen(session_path.c_str(), "ab");
    const auto journal_path = (fs::path(dir) / kJournalFile).string();
    const bool fresh_journal = !fs::exists(journal_path) || fs::file_size(journal_path) == 0;
    s->journal_file_ = std::fopen(journal_path.c_str(), "ab");
    if (!s->session_file_ || !s->journal_file_) throw Error("cannot open session files in " + dir);
    if (fresh_journal) s->append(s->journal_file_, std::string(kJournalHeader) + "\n");
    return s;
}

void LabelSession::replay() {
    const auto session_path = (fs::path(dir_) / kSessionFile).string();
    const auto lines = read_complete_lines(session_path);
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const auto fields = text::split(lines[ln], ',');
        if (fields[0] == "query") {
            if (fields.size() != 5) throw ParseError(session_path, ln + 1, "bad query record");
            const auto idx = text::parse_int(fields[3]);
            const auto seed = text::parse_int(fields[4]);
            if (!idx || !seed || *idx < 0) throw ParseError(session_path, ln + 1, "bad query record");
            LabelQuery q{std::string(fields[1]), std::string(fields[2]), static_cast<std::size_t>(*idx), *seed};
            if (queries_.emplace(q.query_id, QueryState{q, std::nullopt, false}).second) order_.push_back(q.query_id);
        } else if (fields[0] == "skip") {
            if (fields.size() != 2) throw ParseError(session_path, ln + 1, "bad skip record");
            const auto it = queries_.find(std::string(fields[1]));
            if (it == queries_.end()) throw ParseError(session_path, ln + 1, "skip for unknown query");
            it->second.skipped = true;
        } else if (fields[0] != "class") {
            throw ParseError(session_path, ln + 1, "unknown session record");
        }
    }

    const auto journal_path = (fs::path(dir_) / kJournalFile).string();
    const auto journal = read_complete_lines(journal_path);
    for (std::size_t ln = 1; ln < journal.size(); ++ln) {
        if (text::trim(journal[ln]).empty()) continue;
        const auto fields = text::split(journal[ln], ',');
        if (fields.size() != 5) throw ParseError(journal_path, ln + 1, "bad journal record");
        const auto it = queries_.find(std::string(fields[0]));
        const auto c = text::parse_int(fields[3]);
        if (it == queries_.end()) throw ParseError(journal_path, ln + 1, "label for unknown query");
        if (!c || !space_.contains(static_cast<ClassIndex>(*c))) throw ParseError(journal_path, ln + 1, "bad class");
        if (it->second.label) continue;  // first record wins
        it->second.label = static_cast<ClassIndex>(*c);
        it->second.skipped = false;
        accepted_.emplace_back(it->first, *it->second.label);
        ++consumed_;
    }
}

std::size_t LabelSession::consumed() const {
    std::lock_guard lock(mu_);
    return consumed_;
}

SessionStatus LabelSession::status_locked() const {
    if (aborted_) return SessionStatus::aborted;
    if (queries_.empty()) return SessionStatus::open;
    const bool all = std::all_of(queries_.begin(), queries_.end(), [](const auto& kv) { return kv.second.resolved(); });
    return all ? SessionStatus::complete : SessionStatus::open;
}

SessionStatus LabelSession::status() const {
    std::lock_guard lock(mu_);
    return status_locked();
}

void LabelSession::enqueue(std::span<const LabelQuery> queries) {
    std::lock_guard lock(mu_);
    std::string records;
    std::vector<LabelQuery> fresh;
    for (const auto& q : queries) {
        if (queries_.count(q.query_id)) continue;
        if (!valid_token(q.query_id) || !valid_token(q.sample_id))
            throw ValidationError("query and sample ids must not contain commas or whitespace");
        records += "query," + q.query_id + "," + q.sample_id + "," + std::to_string(q.sample_index) + "," +
                   std::to_string(q.seed) + "\n";
        fresh.push_back(q);
    }
    if (records.empty()) return;
    append(session_file_, records);
    for (const auto& q : fresh) {
        order_.push_back(q.query_id);
        queries_.emplace(q.query_id, QueryState{q, std::nullopt, false});
    }
    cv_.notify_all();
}

SubmitResult LabelSession::submit(const std::string& query_id, ClassIndex class_index) {
    std::lock_guard lock(mu_);
    const auto it = queries_.find(query_id);
    if (it == queries_.end()) return {SubmitStatus::unknown_query, consumed_};
    if (!space_.contains(class_index)) return {SubmitStatus::invalid_class, consumed_};
    if (it->second.resolved()) return {SubmitStatus::duplicate, consumed_};
    if (aborted_) return {SubmitStatus::not_open, consumed_};
    if (consumed_ >= max_labels_) return {SubmitStatus::over_budget, consumed_};

    const auto& q = it->second.query;
    append(journal_file_, q.query_id + "," + q.sample_id + "," + std::to_string(q.seed) + "," +
                              std::to_string(class_index) + "," + utc_timestamp() + "\n");
    it->second.label = class_index;
    it->second.skipped = false;
    accepted_.emplace_back(query_id, class_index);
    ++consumed_;
    cv_.notify_all();
    return {SubmitStatus::accepted, consumed_};
}

bool LabelSession::skip(const std::string& query_id) {
    std::lock_guard lock(mu_);
    const auto it = queries_.find(query_id);
    if (it == queries_.end() || it->second.resolved()) return false;
    append(session_file_, "skip," + query_id + "\n");
    it->second.skipped = true;
    cv_.notify_all();
    return true;
}

void LabelSession::abort() {
    std::lock_guard lock(mu_);
    aborted_ = true;
    cv_.notify_all();
}

std::optional<QueryState> LabelSession::query(const std::string& query_id) const {
    std::lock_guard lock(mu_);
    const auto it = queries_.find(query_id);
    if (it == queries_.end()) return std::nullopt;
    return it->second;
}

std::vector<LabelQuery> LabelSession::pending(std::size_t limit) const {
    std::lock_guard lock(mu_);
    std::vector<LabelQuery> out;
    for (const auto& id : order_) {
        if (out.size() >= limit) break;
        const auto& st = queries_.at(id);
        if (!st.resolved()) out.push_back(st.query);
    }
    return out;
}

SessionProgress LabelSession::progress() const {
    std::lock_guard lock(mu_);
    SessionProgress p;
    p.total_queries = queries_.size();
    for (const auto& [id, st] : queries_) {
        auto& seed = p.per_seed[st.query.seed];
        ++seed.total;
        if (st.label) {
            ++p.answered;
            ++seed.answered;
        } else if (st.skipped) {
            ++p.skipped;
        }
    }
    return p;
}

std::vector<std::pair<std::string, ClassIndex>> LabelSession::accepted() const {
    std::lock_guard lock(mu_);
    return accepted_;
}

bool LabelSession::wait_resolved(const std::vector<std::string>& query_ids) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] {
        if (aborted_) return true;
        return std::all_of(query_ids.begin(), query_ids.end(), [&](const auto& id) {
            const auto it = queries_.find(id);
            return it != queries_.end() && it->second.resolved();
        });
    });
    return !aborted_;
}

std::vector<std::optional<ClassIndex>> SessionProvider::label(std::span<const LabelQuery> batch) {
    session_.enqueue(batch);
    std::vector<std::string> ids;
    for (const auto& q : batch) ids.push_back(q.query_id);
    if (!session_.wait_resolved(ids)) throw ProviderRefusal("labeling session " + session_.id() + " was aborted");
    std::vector<std::optional<ClassIndex>> out;
    for (const auto& id : ids) out.push_back(session_.query(id)->label);
    return out;
}

std::string preview_text(const Sample& s, Modality modality) {
    std::ostringstream os;
    const auto& v = s.values;
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (modality == Modality::time_series) {
        static const char* bars[] = {"▁", "▂", "▃", "▄", "▅", "▆", "▇", "█"};
        const double span = *mx - *mn;
        for (double x : v) {
            const int b = span > 0.0 ? static_cast<int>(std::lround((x - *mn) / span * 7.0)) : 0;
            os << bars[std::clamp(b, 0, 7)];
        }
        os << "\n  length=" << v.size();
    } else {
        os << "  dim=" << v.size() << " head=[";
        for (std::size_t i = 0; i < std::min<std::size_t>(v.size(), 6); ++i) os << (i ? ", " : "") << v[i];
        os << (v.size() > 6 ? ", ...]" : "]");
    }
    os << " min=" << *mn << " max=" << *mx << " mean=" << mean;
    return os.str();
}

std::vector<std::optional<ClassIndex>> InteractiveProvider::label(std::span<const LabelQuery> batch) {
    session_.enqueue(batch);
    std::vector<std::optional<ClassIndex>> out;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& q = batch[j];
        const auto state = session_.query(q.query_id);
        if (state && state->label) {
            out.push_back(state->label);
            continue;
        }
        if (state && state->skipped) {
            out.push_back(std::nullopt);
            continue;
        }

        out_ << "\n[seed " << q.seed << "] query " << (j + 1) << "/" << batch.size() << "  sample " << q.sample_id
             << "  (budget " << session_.consumed() << "/" << session_.max_labels() << ")\n";
        const auto idx = ds_.find(q.sample_id);
        if (idx < ds_.size()) out_ << preview_text(ds_[idx], ds_.modality()) << "\n";
        for (std::size_t c = 0; c < session_.label_space().size(); ++c)
            out_ << "  " << c << ") " << session_.label_space().name(static_cast<ClassIndex>(c)) << "\n";

        while (true) {
            out_ << "label [0-" << session_.label_space().size() - 1 << ", skip, abort]> " << std::flush;
            std::string line;
            if (!std::getline(in_, line)) {
                session_.abort();
                throw ProviderRefusal("input closed; session state preserved");
            }
            const auto answer = text::trim(line);
            if (answer == "abort") {
                session_.abort();
                throw ProviderRefusal("labeling aborted; session state preserved");
            }
            if (answer == "skip") {
                session_.skip(q.query_id);
                out.push_back(std::nullopt);
                break;
            }
            const auto c = text::parse_int(answer);
            if (!c || !session_.label_space().contains(static_cast<ClassIndex>(*c))) {
                out_ << "  not a class index\n";
                continue;
            }
            const auto r = session_.submit(q.query_id, static_cast<ClassIndex>(*c));
            if (r.status == SubmitStatus::over_budget) {
                session_.abort();
                throw ProviderRefusal("labeling budget exhausted");
            }
            out.emplace_back(session_.query(q.query_id)->label);
            break;
        }
    }
    return out;
}

}  // namespace memlabel
