#pragma once

#include <stdexcept>
#include <string>

namespace mendkit {

// Root of every error the engine throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedLanguage : public Error {
public:
    explicit UnsupportedLanguage(const std::string& tag)
        : Error("unsupported language: '" + tag + "'") {}
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class HunkExceedsBudget : public Error {
public:
    using Error::Error;
};

class BackendUnavailable : public Error {
public:
    using Error::Error;
};

class MalformedResponse : public Error {
public:
    using Error::Error;
};

class PatchConflict : public Error {
public:
    using Error::Error;
};

class SandboxError : public Error {
public:
    using Error::Error;
};

class ManifestError : public Error {
public:
    using Error::Error;
};

class ScanError : public Error {
public:
    using Error::Error;
};

}  // namespace mendkit
