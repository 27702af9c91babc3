#pragma once

#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "memlabel/dataset.hpp"
#include "memlabel/weak_label.hpp"

namespace memlabel {

/// Answers from ground truth; never refuses. Unknown ids raise ValidationError.
class OracleProvider : public LabelProvider {
public:
    explicit OracleProvider(GroundTruth gt) : gt_(std::move(gt)) {}
    std::vector<std::optional<ClassIndex>> label(std::span<const LabelQuery> batch) override;

private:
    GroundTruth gt_;
};

/// Copy of `gt` where each sample independently, with probability `rate`,
/// carries a uniformly drawn wrong class. Simulates an imperfect expert.
GroundTruth flip_labels(const GroundTruth& gt, const Dataset& ds, const LabelSpace& space, double rate,
                        std::int64_t seed);

enum class SessionStatus { open, complete, aborted };
std::string_view to_string(SessionStatus s);

enum class SubmitStatus { accepted, unknown_query, duplicate, over_budget, invalid_class, not_open };

struct SubmitResult {
    SubmitStatus status = SubmitStatus::accepted;
    std::size_t consumed = 0;
};

struct QueryState {
    LabelQuery query;
    std::optional<ClassIndex> label;
    bool skipped = false;

    bool resolved() const noexcept { return label.has_value() || skipped; }
};

struct SeedProgress {
    std::size_t total = 0;
    std::size_t answered = 0;
};

struct SessionProgress {
    std::size_t total_queries = 0;
    std::size_t answered = 0;
    std::size_t skipped = 0;
    std::map<std::int64_t, SeedProgress> per_seed;
};

/// Durable human-in-the-loop labeling state.
///
/// Lives in a directory holding two append-only files:
///   session.txt  header, class names, queued queries and skips
///   journal.csv  `query_id,sample_id,seed,class_index,timestamp` per accepted label
/// Every mutation is flushed to disk before it is acknowledged, and opening
/// an existing directory replays both files. A torn final journal line (a
/// crash mid-append) is dropped on replay since it was never acknowledged.
/// All members are safe to call from multiple threads.
class LabelSession {
public:
    /// Opens `dir`, creating it when absent. An existing session must agree
    /// on id, label space and budget.
    static std::unique_ptr<LabelSession> open(const std::string& dir, const std::string& id, const LabelSpace& space,
                                              std::size_t max_labels);
    /// Opens an existing session directory as-is.
    static std::unique_ptr<LabelSession> open_existing(const std::string& dir);

    ~LabelSession();
    LabelSession(const LabelSession&) = delete;
    LabelSession& operator=(const LabelSession&) = delete;

    const std::string& id() const noexcept { return id_; }
    const LabelSpace& label_space() const noexcept { return space_; }
    std::size_t max_labels() const noexcept { return max_labels_; }
    std::size_t consumed() const;
    SessionStatus status() const;

    /// Adds queries not already known; queries seen before keep their state.
    void enqueue(std::span<const LabelQuery> queries);

    SubmitResult submit(const std::string& query_id, ClassIndex class_index);
    /// Marks a pending query as declined. Returns false if not pending.
    bool skip(const std::string& query_id);
    /// Sets status to aborted and wakes waiters. Not persisted: reopening resumes.
    void abort();

    std::optional<QueryState> query(const std::string& query_id) const;
    std::vector<LabelQuery> pending(std::size_t limit = SIZE_MAX) const;
    SessionProgress progress() const;
    /// Accepted labels in journal order.
    std::vector<std::pair<std::string, ClassIndex>> accepted() const;

    /// Blocks until every listed query is resolved. Returns false if the
    /// session was aborted first.
    bool wait_resolved(const std::vector<std::string>& query_ids);

private:
    LabelSession(std::string dir, std::string id, LabelSpace space, std::size_t max_labels);
    void replay();
    void append(std::FILE* f, const std::string& line);
    SessionStatus status_locked() const;

    std::string dir_;
    std::string id_;
    LabelSpace space_;
    std::size_t max_labels_;
    std::size_t consumed_ = 0;
    bool aborted_ = false;
    std::vector<std::string> order_;
    std::map<std::string, QueryState> queries_;
    std::vector<std::pair<std::string, ClassIndex>> accepted_;
    std::FILE* session_file_ = nullptr;
    std::FILE* journal_file_ = nullptr;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

/// Routes batches through a LabelSession and blocks until an outside party
/// (the HTTP service) resolves them.
class SessionProvider : public LabelProvider {
public:
    explicit SessionProvider(LabelSession& session) : session_(session) {}
    std::vector<std::optional<ClassIndex>> label(std::span<const LabelQuery> batch) override;

private:
    LabelSession& session_;
};

/// Terminal prompt per query. Accepts a class index, `skip` or `abort`;
/// anything else is re-prompted. Answers already in the session are reused,
/// so a restarted run resumes where the last one stopped.
class InteractiveProvider : public LabelProvider {
public:
    InteractiveProvider(std::istream& in, std::ostream& out, LabelSession& session, const Dataset& ds)
        : in_(in), out_(out), session_(session), ds_(ds) {}
    std::vector<std::optional<ClassIndex>> label(std::span<const LabelQuery> batch) override;

private:
    std::istream& in_;
    std::ostream& out_;
    LabelSession& session_;
    const Dataset& ds_;
};

/// Text preview: sparkline and statistics for series, a value summary for vectors.
std::string preview_text(const Sample& s, Modality modality);

}  // namespace memlabel
