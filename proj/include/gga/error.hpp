#pragma once

#include <stdexcept>
#include <string>

namespace gga {

// Root of every error the toolkit raises. kind() is a stable short tag used in
// validation reports and CLI diagnostics.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "Error"; }
};

#define GGA_DEFINE_ERROR(Name)                                          \
    class Name : public Error {                                         \
    public:                                                             \
        explicit Name(const std::string& what) : Error(what) {}         \
        const char* kind() const noexcept override { return #Name; }    \
    }

// Malformed arguments that violate a documented precondition.
GGA_DEFINE_ERROR(InputError);

// graph
GGA_DEFINE_ERROR(ReachabilityError);

// linearize
GGA_DEFINE_ERROR(TemplateError);

// trace container
GGA_DEFINE_ERROR(FormatError);
GGA_DEFINE_ERROR(ShapeError);
GGA_DEFINE_ERROR(InvariantError);

// metrics / baselines
GGA_DEFINE_ERROR(EmptyPathError);
GGA_DEFINE_ERROR(EmptyAnswerError);
GGA_DEFINE_ERROR(AllMaskedError);
GGA_DEFINE_ERROR(ZeroVectorError);
GGA_DEFINE_ERROR(EmptySequenceError);

// labeling
GGA_DEFINE_ERROR(EmptyGoldError);

// detector
GGA_DEFINE_ERROR(DegenerateMatrixError);
GGA_DEFINE_ERROR(SingleClassError);
GGA_DEFINE_ERROR(StratificationError);

// analysis
GGA_DEFINE_ERROR(DegenerateSampleError);
GGA_DEFINE_ERROR(ConstantSeriesError);

// synth
GGA_DEFINE_ERROR(SpecError);

#undef GGA_DEFINE_ERROR

// Failure inside one pipeline stage; carries the stage name and, when the
// failure is tied to one example, its id.
class StageError : public Error {
public:
    StageError(std::string stage, std::string id, const std::string& what)
        : Error("[" + stage + (id.empty() ? "" : " id=" + id) + "] " + what),
          stage_(std::move(stage)), id_(std::move(id)) {}
    const char* kind() const noexcept override { return "StageError"; }
    const std::string& stage() const noexcept { return stage_; }
    const std::string& id() const noexcept { return id_; }

private:
    std::string stage_;
    std::string id_;
};

} // namespace gga
